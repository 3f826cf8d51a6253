#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "spn/model.hpp"

namespace spn {

// Model documents are JSON objects:
//   {"signature": "...", "n": 2,
//    "leaves": {"f1": {"type": "categorical", "params": {"probs": [0.1, 0.9]}},
//               "g":  {"type": "gaussian",
//                      "params": {"mean": [0, 0], "covariance": [1, 0, 0, 1]}}}}
// Covariances are row-major. A categorical leaf may carry an explicit
// "support"; otherwise it is inferred from the pmf length and the scope size.
SpnModel model_from_json(std::string_view text);
std::string model_to_json(const SpnModel& model);

SpnModel load_model(const std::filesystem::path& path);
void save_model(const SpnModel& model, const std::filesystem::path& path);

} // namespace spn
