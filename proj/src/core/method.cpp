#include "fsad/method.hpp"

#include "fsad/error.hpp"

namespace fsad {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kPrototypical: return "prototypical";
    case Method::kMaml: return "maml";
    case Method::kOneClass: return "oneclass";
    case Method::kFineTune: return "finetune";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "prototypical") return Method::kPrototypical;
  if (name == "maml") return Method::kMaml;
  if (name == "oneclass") return Method::kOneClass;
  if (name == "finetune") return Method::kFineTune;
  fail(ErrorCode::kConfig, "unknown method '" + std::string(name) +
                               "' (expected prototypical, maml, oneclass or finetune)");
}

}  // namespace fsad
