#include "blin/common.hpp"

#include <string>

namespace blin {

bool Tolerances::set(const std::string& name, double value) {
  double* target = nullptr;
  if (name == "psd") target = &psd;
  else if (name == "num") target = &num;
  else if (name == "eq") target = &eq;
  else if (name == "pinv") target = &pinv;
  else if (name == "independence" || name == "ind") target = &independence;
  else if (name == "eig") target = &eig;
  else if (name == "symmetry") target = &symmetry;
  if (target == nullptr || !(value > 0.0)) return false;
  *target = value;
  return true;
}

namespace {
std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}
}  // namespace

SpecError::SpecError(std::vector<std::string> violations)
    : Error(join(violations)), violations_(std::move(violations)) {}

std::pair<std::size_t, std::size_t> slot_pair(std::size_t r, std::size_t slot) {
  std::size_t i = 0;
  std::size_t row_len = r;
  while (slot >= row_len) {
    slot -= row_len;
    --row_len;
    ++i;
  }
  return {i, i + slot};
}

std::string slot_name(std::size_t r, std::size_t slot) {
  const auto [i, j] = slot_pair(r, slot);
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

}  // namespace blin
