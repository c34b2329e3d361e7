#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace geoalign {

struct CultureProfile {
  std::string name;
  std::string prompt_keyword;     // may be empty (the UK profile)
  std::string editorial_keyword;  // inserted before common nouns in editorial prompts
  std::string mask_text;          // may be in a non-Latin script
  double mask_multiplier = 1.0;
  friend bool operator==(const CultureProfile&, const CultureProfile&) = default;
};

class CultureRegistry {
 public:
  CultureRegistry() = default;
  explicit CultureRegistry(std::vector<CultureProfile> profiles);

  // YAML or JSON: either a top-level list of profiles or {cultures: [...]}.
  static CultureRegistry load(const std::filesystem::path& file);
  static CultureRegistry parse(std::string_view yaml);
  // Profiles for indian, japanese, middle_eastern and uk.
  static CultureRegistry defaults();

  const CultureProfile& get(std::string_view name) const;  // throws UnknownCulture
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;
  const std::vector<CultureProfile>& profiles() const { return profiles_; }

 private:
  std::vector<CultureProfile> profiles_;
};

// Checks the per-profile invariants; require_editorial adds the Method 3 requirement.
void validate_profile(const CultureProfile& profile, bool require_editorial = false);

}  // namespace geoalign
