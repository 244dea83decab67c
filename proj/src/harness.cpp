namespace leanet {}
