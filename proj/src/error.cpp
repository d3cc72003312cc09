#include "ttc/error.hpp"

namespace ttc {

namespace {
std::string compose(const std::string& kind, const std::string& field,
                    const std::string& message) {
  std::string out = kind;
  if (!field.empty()) out += " [" + field + "]";
  out += ": ";
  out += message;
  return out;
}
}  // namespace

Error::Error(std::string kind, std::string field, const std::string& message)
    : std::runtime_error(compose(kind, field, message)),
      kind_(std::move(kind)),
      field_(std::move(field)) {}

}  // namespace ttc
