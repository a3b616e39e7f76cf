#pragma once

#include <string>
#include <string_view>

namespace fsad {

enum class Method { kPrototypical, kMaml, kOneClass, kFineTune };

std::string_view to_string(Method method) noexcept;

// Accepts "prototypical", "maml", "oneclass", "finetune". Anything else is a
// config error.
Method parse_method(std::string_view name);

// Meta-learned methods produce one model for all domains; the baselines are
// fitted per target domain.
inline bool is_meta_method(Method m) { return m == Method::kPrototypical || m == Method::kMaml; }

}  // namespace fsad
