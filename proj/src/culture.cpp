#include "geoalign/culture.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "geoalign/error.hpp"
#include "geoalign/text.hpp"

namespace geoalign {

void validate_profile(const CultureProfile& profile, bool require_editorial) {
  if (trim(profile.name).empty()) throw Error(ErrorCode::InvalidProfile, "culture profile without a name");
  if (!std::isfinite(profile.mask_multiplier)) {
    throw Error(ErrorCode::InvalidProfile, profile.name + ": mask_multiplier must be finite");
  }
  if (require_editorial && trim(profile.editorial_keyword).empty()) {
    throw Error(ErrorCode::InvalidProfile, profile.name + ": editorial_keyword is required for method 3");
  }
}

CultureRegistry::CultureRegistry(std::vector<CultureProfile> profiles) : profiles_(std::move(profiles)) {
  std::set<std::string> seen;
  for (const auto& p : profiles_) {
    validate_profile(p);
    if (!seen.insert(p.name).second) throw Error(ErrorCode::InvalidProfile, "duplicate culture '" + p.name + "'");
  }
}

CultureRegistry CultureRegistry::defaults() {
  return CultureRegistry({
      {"indian", "indian", "Indian", "भारतीय कार्टून style", 3.0},
      {"japanese", "japanese", "Japanese", "日本画", 0.2},
      {"middle_eastern", "middle eastern", "middle eastern", "كارتون عربي", 0.3},
      {"uk", "", "English", "English cartoon", 0.3},
  });
}

namespace {

// Present keys must convert; as<T>(fallback) would silently keep the fallback.
template <class T>
T value_or(const YAML::Node& parent, const char* key, T fallback) {
  const YAML::Node n = parent[key];
  return n ? n.as<T>() : fallback;
}

CultureRegistry from_node(YAML::Node root, const std::string& where) {
  std::vector<CultureProfile> profiles;
  try {
    if (root.IsMap() && root["cultures"]) root = root["cultures"];
    if (!root.IsSequence()) throw Error(ErrorCode::BadConfig, where + ": expected a list of culture profiles");
    for (const auto& node : root) {
      CultureProfile p;
      p.name = value_or<std::string>(node, "name", "");
      p.prompt_keyword = value_or<std::string>(node, "prompt_keyword", "");
      p.editorial_keyword = value_or<std::string>(node, "editorial_keyword", "");
      p.mask_text = value_or<std::string>(node, "mask_text", "");
      p.mask_multiplier = value_or<double>(node, "mask_multiplier", 1.0);
      profiles.push_back(std::move(p));
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::BadConfig, where + ": " + e.what());
  }
  return CultureRegistry(std::move(profiles));
}

}  // namespace

CultureRegistry CultureRegistry::parse(std::string_view yaml) {
  try {
    return from_node(YAML::Load(std::string(yaml)), "culture profiles");
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("culture profiles: ") + e.what());
  }
}

CultureRegistry CultureRegistry::load(const std::filesystem::path& file) {
  try {
    return from_node(YAML::LoadFile(file.string()), file.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::Io, "cannot read " + file.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::BadConfig, file.string() + ": " + e.what());
  }
}

const CultureProfile& CultureRegistry::get(std::string_view name) const {
  auto it = std::find_if(profiles_.begin(), profiles_.end(), [&](const auto& p) { return p.name == name; });
  if (it == profiles_.end()) {
    std::string known;
    for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::UnknownCulture, "unknown culture '" + std::string(name) + "' (known: " + known + ")");
  }
  return *it;
}

bool CultureRegistry::contains(std::string_view name) const {
  return std::any_of(profiles_.begin(), profiles_.end(), [&](const auto& p) { return p.name == name; });
}

std::vector<std::string> CultureRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& p : profiles_) out.push_back(p.name);
  return out;
}

}  // namespace geoalign
