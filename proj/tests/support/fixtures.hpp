#pragma once

// Loading the bundled models and plugging box models into their wirings.

#include <filesystem>
#include <string>
#include <vector>

#include "dynwire/model_io.hpp"

namespace fixtures {

using namespace dynwire;

inline std::filesystem::path model_path(const std::string& name) {
  return std::filesystem::path(DYNWIRE_SOURCE_DIR) / "models" / name;
}

inline std::filesystem::path golden_path(const std::string& name) {
  return std::filesystem::path(DYNWIRE_SOURCE_DIR) / "tests" / "golden" / name;
}

// Box models prefixed with their box names and placed side by side.
inline MealyMachine joint_machine(const io::WiringFile& wf, const std::vector<std::string>& files) {
  std::vector<MealyMachine> parts;
  for (std::size_t k = 0; k < files.size(); ++k) {
    auto m = io::load_mealy(model_path(files[k]));
    parts.push_back(wf.boxes.empty() ? m : with_prefix(m, wf.boxes[k] + "."));
  }
  return parallel(parts);
}

inline DdwdValidation validate_for(const io::WiringFile& wf, const MealyMachine& joint) {
  const auto& f = wf.diagram;
  return io::validate_wiring_file(wf, Relation(f.dom().inputs, f.dom().outputs, joint.dependency().pairs()));
}

// Composite machine, throwing if the wiring does not validate.
inline MealyMachine compose_files(const std::string& wiring, const std::vector<std::string>& files) {
  auto wf = io::load_wiring(model_path(wiring));
  auto joint = joint_machine(wf, files);
  auto v = validate_for(wf, joint);
  if (!v.ok()) throw ValidationError(v.describe(wf.diagram));
  return apply_wiring(*v.value, joint);
}

}  // namespace fixtures
