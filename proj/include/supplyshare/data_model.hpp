#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "supplyshare/csv.hpp"

namespace supplyshare {

enum class Method { FemaleSterilization, OCPills, Implants, Injectables, IUD };
enum class Sector { Public, CommercialMedical, Other };

inline constexpr std::array<Method, 5> kAllMethods{Method::FemaleSterilization, Method::OCPills, Method::Implants,
                                                   Method::Injectables, Method::IUD};
inline constexpr std::array<Sector, 3> kAllSectors{Sector::Public, Sector::CommercialMedical, Sector::Other};

std::string_view to_string(Method m);
std::string_view to_string(Sector s);
/// Accepts display names and common spellings ("OC Pills", "oc_pills", "OCPills").
std::optional<Method> parse_method(std::string_view token);
/// Exact tokens only: "Public", "Commercial_medical", "Other".
std::optional<Sector> parse_sector(std::string_view token);

inline constexpr double kClampEpsilon = 1e-4;
inline constexpr double kMinYear = 1970.0;
inline constexpr double kMaxYear = 2035.0;
inline constexpr double kSectorSumTolerance = 1e-3;
inline constexpr double kSeFloor = 0.005;

double logit(double p);
double inv_logit(double x);
double clamp_proportion(double p);

/// Logit-scale variance of a proportion by the delta method: (se / (p (1 - p)))^2.
double delta_method_var(double p, double se);

struct SurveyObservation {
    std::string country;
    std::string province;  // empty for national-level rows
    Method method = Method::FemaleSterilization;
    double avg_year = 0.0;
    Sector sector = Sector::Public;
    double proportion = 0.0;
    double se = 0.0;
    long n = 0;
};

struct CountryInfo {
    std::string name;
    std::string iso_code;
    std::string major_area;
    std::string subcontinent;
    bool fp2030 = false;
};

/// Country -> subcontinent lookup plus dense indices for the countries,
/// provinces and subcontinents that are actually in use.
class GeographyIndex {
public:
    static GeographyIndex builtin();
    /// Headers: "Country or area", "ISO Code", "Major area", "Region", "FP2020".
    static GeographyIndex from_table(const csv::Table& table);
    /// `path` may be a file or the tag "builtin".
    static GeographyIndex load(const std::string& path);

    void add_country(CountryInfo info);
    void add_province(std::string_view country, std::string_view province);

    /// Case- and whitespace-insensitive lookup.
    const CountryInfo* find(std::string_view country) const;

    const std::vector<CountryInfo>& countries() const { return countries_; }
    const std::vector<std::string>& subcontinents() const { return subcontinents_; }
    const std::vector<std::string>& provinces(std::size_t country) const { return provinces_[country]; }

    std::optional<std::size_t> country_index(std::string_view country) const;
    std::size_t subcontinent_index(std::size_t country) const { return country_subcontinent_[country]; }

    /// Restriction to the given countries (order preserved as given).
    GeographyIndex subset(const std::vector<std::string>& countries) const;

    std::string to_csv() const;

private:
    std::vector<CountryInfo> countries_;
    std::vector<std::vector<std::string>> provinces_;
    std::vector<std::string> subcontinents_;
    std::vector<std::size_t> country_subcontinent_;
};

struct IngestSettings {
    bool national = true;
    bool local = false;
    std::optional<std::string> mycountry;
    bool fp2030 = true;
    std::string source = "builtin";
};

struct CleanDataset {
    std::vector<SurveyObservation> rows;
    GeographyIndex geography;
    IngestSettings settings;
    std::vector<std::string> warnings;
};

/// Applies schema, range, geography, FP2030, local-country and
/// sector-composition checks. Rows come back in canonical order.
CleanDataset ingest_table(const csv::Table& table, const IngestSettings& settings, const GeographyIndex& geography);

/// `settings.source` is a CSV path or "builtin" (the bundled synthetic fixture
/// for the requested level).
CleanDataset load_survey_data(const IngestSettings& settings, const GeographyIndex& geography);
CleanDataset load_survey_data(const IngestSettings& settings);

std::string to_canonical_csv(const std::vector<SurveyObservation>& rows);

std::string population_name(std::string_view country, std::string_view province);

/// One observed sector composition: proportions and SEs for Public,
/// Commercial_medical, Other.
struct SectorTriple {
    std::array<double, 3> p{};
    std::array<double, 3> se{};
};

/// A logit-scale observation before model indices are attached.
/// `sector` is 0 for the public share and 1 for the commercial share of the
/// private sector.
struct LogitValue {
    int sector = 0;
    double y = 0.0;
    double var = 0.0;
    bool clamped = false;
};

struct LogitConversion {
    std::vector<LogitValue> values;
    bool ratio_omitted = false;
};

LogitConversion to_logit_obs(const SectorTriple& group);

/// Strict form of the private-sector ratio; throws DegenerateCompositionError
/// when p2 + p3 == 0.
LogitValue ratio_logit(double p2, double p3, double se2);

struct LogitObservation {
    int population = 0;
    int time = 0;  // index on the half-year grid
    int method = 0;
    int sector = 0;  // 0 or 1
    double y = 0.0;
    double var = 1.0;
    bool clamped = false;
};

}  // namespace supplyshare
