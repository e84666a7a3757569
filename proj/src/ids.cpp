#include "dni/ids.hpp"

#include <stdexcept>
#include <string>

namespace dni {

std::string_view to_string(ElectrodeRole role) {
  switch (role) {
    case ElectrodeRole::observed: return "observed";
    case ElectrodeRole::masked: return "masked";
    case ElectrodeRole::naturally_missing: return "naturally_missing";
  }
  return "unknown";
}

std::string_view to_string(OutputLabel label) {
  switch (label) {
    case OutputLabel::reconstruction: return "reconstruction";
    case OutputLabel::imputation: return "imputation";
    case OutputLabel::no_ground_truth: return "no_ground_truth";
  }
  return "unknown";
}

OutputLabel output_label_from_string(std::string_view name) {
  for (auto label : {OutputLabel::reconstruction, OutputLabel::imputation, OutputLabel::no_ground_truth})
    if (to_string(label) == name) return label;
  throw std::invalid_argument("unknown output label '" + std::string(name) + "'");
}

}  // namespace dni
