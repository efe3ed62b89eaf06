#include "supplyshare/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "supplyshare/error.hpp"

#ifndef SUPPLYSHARE_DATA_DIR
#define SUPPLYSHARE_DATA_DIR "data"
#endif

namespace supplyshare {

namespace {

std::string squash(std::string_view token) {
    std::string out;
    for (char c : csv::lower(csv::trim(token))) {
        if (c != ' ' && c != '_' && c != '-' && c != '.') out.push_back(c);
    }
    return out;
}

std::string name_key(std::string_view name) { return csv::lower(csv::trim(name)); }

// UNSD intermediate regions for the FP2030 countries covered by the national
// and subnational survey databases, plus a few non-participants.
constexpr const char* kBuiltinGeography = R"(Country or area,ISO Code,Major area,Region,FP2020
Afghanistan,4,Asia,Southern Asia,Yes
Albania,8,Europe,Southern Europe,No
Algeria,12,Africa,Northern Africa,No
American Samoa,16,Oceania,Polynesia,No
Benin,204,Africa,Western Africa,Yes
Burkina Faso,854,Africa,Western Africa,Yes
Cameroon,120,Africa,Middle Africa,Yes
Congo,178,Africa,Middle Africa,Yes
Democratic Republic of Congo,180,Africa,Middle Africa,Yes
Cote d'Ivoire,384,Africa,Western Africa,Yes
Ethiopia,231,Africa,Eastern Africa,Yes
Ghana,288,Africa,Western Africa,Yes
Guinea,324,Africa,Western Africa,Yes
India,356,Asia,Southern Asia,Yes
Kenya,404,Africa,Eastern Africa,Yes
Liberia,430,Africa,Western Africa,Yes
Madagascar,450,Africa,Eastern Africa,Yes
Malawi,454,Africa,Eastern Africa,Yes
Mali,466,Africa,Western Africa,Yes
Mozambique,508,Africa,Eastern Africa,Yes
Myanmar,104,Asia,South-Eastern Asia,Yes
Nepal,524,Asia,Southern Asia,Yes
Niger,562,Africa,Western Africa,Yes
Nigeria,566,Africa,Western Africa,Yes
Pakistan,586,Asia,Southern Asia,Yes
Philippines,608,Asia,South-Eastern Asia,Yes
Rwanda,646,Africa,Eastern Africa,Yes
Senegal,686,Africa,Western Africa,Yes
Sierra Leone,694,Africa,Western Africa,Yes
Tanzania,834,Africa,Eastern Africa,Yes
Togo,768,Africa,Western Africa,Yes
Uganda,800,Africa,Eastern Africa,Yes
Zimbabwe,716,Africa,Eastern Africa,Yes
)";

const std::vector<std::string> kRequiredColumns{"Country",   "Method",        "average_year", "sector_categories",
                                                "proportion", "SE.proportion", "n"};

}  // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::FemaleSterilization: return "Female Sterilization";
        case Method::OCPills: return "OC Pills";
        case Method::Implants: return "Implants";
        case Method::Injectables: return "Injectables";
        case Method::IUD: return "IUD";
    }
    return "?";
}

std::string_view to_string(Sector s) {
    switch (s) {
        case Sector::Public: return "Public";
        case Sector::CommercialMedical: return "Commercial_medical";
        case Sector::Other: return "Other";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view token) {
    const std::string key = squash(token);
    if (key == "femalesterilization" || key == "femalesterilisation" || key == "sterilization") {
        return Method::FemaleSterilization;
    }
    if (key == "ocpills" || key == "pills" || key == "pill") return Method::OCPills;
    if (key == "implants" || key == "implant") return Method::Implants;
    if (key == "injectables" || key == "injectable") return Method::Injectables;
    if (key == "iud") return Method::IUD;
    return std::nullopt;
}

std::optional<Sector> parse_sector(std::string_view token) {
    const std::string t = csv::trim(token);
    if (t == "Public") return Sector::Public;
    if (t == "Commercial_medical") return Sector::CommercialMedical;
    if (t == "Other") return Sector::Other;
    return std::nullopt;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double inv_logit(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double clamp_proportion(double p) { return std::clamp(p, kClampEpsilon, 1.0 - kClampEpsilon); }

double delta_method_var(double p, double se) {
    const double d = se / (p * (1.0 - p));
    return d * d;
}

// ---------------------------------------------------------------------------
// GeographyIndex

GeographyIndex GeographyIndex::builtin() { return from_table(csv::parse(kBuiltinGeography)); }

GeographyIndex GeographyIndex::from_table(const csv::Table& table) {
    const std::vector<std::string> required{"Country or area", "ISO Code", "Major area", "Region", "FP2020"};
    std::vector<std::string> missing;
    std::vector<std::size_t> idx;
    for (const auto& name : required) {
        auto c = table.column(name);
        if (!c) missing.push_back(name);
        idx.push_back(c.value_or(0));
    }
    if (!missing.empty()) {
        std::string msg = "geography file is missing column(s):";
        for (const auto& m : missing) msg += " '" + m + "'";
        throw SchemaError(msg);
    }
    GeographyIndex geo;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() < table.header.size()) {
            throw SchemaError("geography row " + std::to_string(r + 1) + " has too few fields");
        }
        CountryInfo info;
        info.name = csv::trim(row[idx[0]]);
        info.iso_code = csv::trim(row[idx[1]]);
        info.major_area = csv::trim(row[idx[2]]);
        info.subcontinent = csv::trim(row[idx[3]]);
        const std::string flag = name_key(row[idx[4]]);
        info.fp2030 = flag == "yes" || flag == "true" || flag == "1";
        if (info.name.empty()) continue;
        if (info.subcontinent.empty()) {
            throw SchemaError("geography row for '" + info.name + "' has no Region (subcontinent)");
        }
        geo.add_country(std::move(info));
    }
    return geo;
}

GeographyIndex GeographyIndex::load(const std::string& path) {
    if (path.empty() || path == "builtin") return builtin();
    return from_table(csv::read_file(path));
}

void GeographyIndex::add_country(CountryInfo info) {
    if (find(info.name)) throw SchemaError("duplicate country '" + info.name + "' in geography");
    std::size_t r = 0;
    const std::string key = name_key(info.subcontinent);
    for (; r < subcontinents_.size(); ++r) {
        if (name_key(subcontinents_[r]) == key) break;
    }
    if (r == subcontinents_.size()) subcontinents_.push_back(info.subcontinent);
    country_subcontinent_.push_back(r);
    countries_.push_back(std::move(info));
    provinces_.emplace_back();
}

void GeographyIndex::add_province(std::string_view country, std::string_view province) {
    auto c = country_index(country);
    if (!c) throw UnknownCountryError("'" + std::string(country) + "' is not in the geography index");
    auto& list = provinces_[*c];
    const std::string key = name_key(province);
    for (const auto& p : list) {
        if (name_key(p) == key) return;
    }
    list.push_back(csv::trim(province));
}

const CountryInfo* GeographyIndex::find(std::string_view country) const {
    auto c = country_index(country);
    return c ? &countries_[*c] : nullptr;
}

std::optional<std::size_t> GeographyIndex::country_index(std::string_view country) const {
    const std::string key = name_key(country);
    for (std::size_t i = 0; i < countries_.size(); ++i) {
        if (name_key(countries_[i].name) == key) return i;
    }
    return std::nullopt;
}

GeographyIndex GeographyIndex::subset(const std::vector<std::string>& names) const {
    GeographyIndex out;
    for (const auto& name : names) {
        auto c = country_index(name);
        if (!c) throw UnknownCountryError("'" + name + "' is not in the geography index");
        out.add_country(countries_[*c]);
        for (const auto& p : provinces_[*c]) out.add_province(name, p);
    }
    return out;
}

std::string GeographyIndex::to_csv() const {
    std::ostringstream out;
    csv::write_row(out, {"Country or area", "ISO Code", "Major area", "Region", "FP2020"});
    for (const auto& c : countries_) {
        csv::write_row(out, {c.name, c.iso_code, c.major_area, c.subcontinent, c.fp2030 ? "Yes" : "No"});
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

struct RowKey {
    std::string country, province;
    Method method;
    double year;
    auto tie() const { return std::tie(country, province, method, year); }
    bool operator<(const RowKey& o) const { return tie() < o.tie(); }
};

std::string row_label(std::size_t data_row) {
    // data_row is 0-based; line numbers count the header.
    return "row " + std::to_string(data_row + 1) + " (line " + std::to_string(data_row + 2) + ")";
}

}  // namespace

CleanDataset ingest_table(const csv::Table& table, const IngestSettings& settings, const GeographyIndex& geography) {
    CleanDataset out;
    out.settings = settings;

    // Schema.
    std::vector<std::string> missing;
    for (const auto& col : kRequiredColumns) {
        if (!table.column(col)) missing.push_back(col);
    }
    if (!missing.empty()) {
        std::string msg = "missing or renamed column(s):";
        for (const auto& m : missing) msg += " '" + m + "'";
        std::vector<std::string> unexpected;
        for (const auto& h : table.header) {
            if (h != "Region" && std::find(kRequiredColumns.begin(), kRequiredColumns.end(), h) == kRequiredColumns.end()) {
                unexpected.push_back(h);
            }
        }
        if (!unexpected.empty()) {
            msg += "; unrecognised column(s):";
            for (const auto& u : unexpected) msg += " '" + u + "'";
        }
        msg += ". Expected headers: Country, Region, Method, average_year, sector_categories, proportion, SE.proportion, n";
        throw SchemaError(msg);
    }
    const std::size_t c_country = *table.column("Country");
    const auto c_region = table.column("Region");
    const std::size_t c_method = *table.column("Method");
    const std::size_t c_year = *table.column("average_year");
    const std::size_t c_sector = *table.column("sector_categories");
    const std::size_t c_prop = *table.column("proportion");
    const std::size_t c_se = *table.column("SE.proportion");
    const std::size_t c_n = *table.column("n");

    if (!settings.national && !c_region) {
        throw SchemaError("subnational data requested but the 'Region' column is absent");
    }
    if (settings.local) {
        if (!settings.mycountry || settings.mycountry->empty()) {
            throw ConfigError("local estimation requires mycountry");
        }
        if (!geography.find(*settings.mycountry)) {
            throw UnknownCountryError("mycountry '" + *settings.mycountry + "' is not in the geography index");
        }
    }

    std::vector<SurveyObservation> rows;
    std::vector<std::string> unknown;
    std::size_t dropped_missing = 0, dropped_fp = 0, floored = 0;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& raw = table.rows[r];
        if (raw.size() != table.header.size()) {
            throw SchemaError(row_label(r) + " has " + std::to_string(raw.size()) + " fields, expected " +
                              std::to_string(table.header.size()));
        }
        SurveyObservation obs;
        obs.country = csv::trim(raw[c_country]);
        if (obs.country.empty()) throw SchemaError(row_label(r) + ": empty Country");
        obs.province = c_region ? csv::trim(raw[*c_region]) : std::string();
        if (obs.province == "NA") obs.province.clear();
        if (settings.national && !obs.province.empty()) {
            throw SchemaError(row_label(r) + ": Region is populated but national-level data was requested");
        }
        if (!settings.national && obs.province.empty()) {
            throw SchemaError(row_label(r) + ": empty Region in subnational data");
        }

        auto method = parse_method(raw[c_method]);
        if (!method) throw SchemaError(row_label(r) + ": unknown Method '" + raw[c_method] + "'");
        obs.method = *method;
        auto sector = parse_sector(raw[c_sector]);
        if (!sector) {
            throw SchemaError(row_label(r) + ": unknown sector_categories '" + raw[c_sector] +
                              "' (expected Public, Commercial_medical or Other)");
        }
        obs.sector = *sector;

        auto year = csv::parse_double(raw[c_year]);
        if (!year) throw SchemaError(row_label(r) + ": average_year '" + raw[c_year] + "' is not a number");
        if (*year < kMinYear || *year > kMaxYear) {
            throw RangeError(row_label(r) + ": average_year " + csv::format_double(*year) + " outside [" +
                             csv::format_double(kMinYear) + ", " + csv::format_double(kMaxYear) + "]");
        }
        obs.avg_year = *year;

        auto prop = csv::parse_double(raw[c_prop]);
        if (!prop) {
            if (!csv::trim(raw[c_prop]).empty() && csv::trim(raw[c_prop]) != "NA") {
                throw SchemaError(row_label(r) + ": proportion '" + raw[c_prop] + "' is not a number");
            }
            ++dropped_missing;
            continue;
        }
        if (!(*prop >= 0.0 && *prop <= 1.0)) {
            throw RangeError(row_label(r) + ": proportion " + csv::format_double(*prop) + " outside [0, 1]");
        }
        obs.proportion = *prop;

        auto se = csv::parse_double(raw[c_se]);
        if (!se && !csv::trim(raw[c_se]).empty() && csv::trim(raw[c_se]) != "NA") {
            throw SchemaError(row_label(r) + ": SE.proportion '" + raw[c_se] + "' is not a number");
        }
        obs.se = se.value_or(0.0);
        if (!(obs.se >= 0.0) || !std::isfinite(obs.se)) {
            throw RangeError(row_label(r) + ": SE.proportion " + csv::format_double(obs.se) + " is negative");
        }

        auto n = csv::parse_double(raw[c_n]);
        if (!n) {
            if (!csv::trim(raw[c_n]).empty() && csv::trim(raw[c_n]) != "NA") {
                throw SchemaError(row_label(r) + ": n '" + raw[c_n] + "' is not a number");
            }
            n = 0.0;
        }
        if (*n < 0 || std::floor(*n) != *n) {
            throw RangeError(row_label(r) + ": n " + csv::format_double(*n) + " is not a non-negative integer");
        }
        obs.n = static_cast<long>(*n);

        const CountryInfo* info = geography.find(obs.country);
        if (!info) {
            if (std::find(unknown.begin(), unknown.end(), obs.country) == unknown.end()) unknown.push_back(obs.country);
            continue;
        }
        obs.country = info->name;
        if (settings.fp2030 && !info->fp2030) {
            ++dropped_fp;
            continue;
        }
        if (settings.local && csv::lower(obs.country) != csv::lower(csv::trim(*settings.mycountry))) continue;
        rows.push_back(std::move(obs));
    }

    if (!unknown.empty()) {
        std::string msg = "country name(s) not found in the geography index:";
        for (const auto& u : unknown) msg += " '" + u + "'";
        throw UnknownCountryError(msg);
    }

    // Canonical province spelling: first occurrence wins (exact match after trim/lowercase).
    std::map<std::pair<std::string, std::string>, std::string> province_names;
    for (auto& row : rows) {
        if (row.province.empty()) continue;
        auto key = std::make_pair(row.country, csv::lower(row.province));
        auto [it, inserted] = province_names.emplace(key, row.province);
        row.province = it->second;
    }

    // Sector composition check per replicate of a (country, province, method, year) group.
    std::map<RowKey, std::array<std::vector<std::size_t>, 3>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& o = rows[i];
        groups[RowKey{o.country, o.province, o.method, o.avg_year}][static_cast<int>(o.sector)].push_back(i);
    }
    std::vector<char> keep(rows.size(), 0);
    for (const auto& [key, by_sector] : groups) {
        const std::size_t reps = std::max({by_sector[0].size(), by_sector[1].size(), by_sector[2].size()});
        long total_n = 0;
        for (const auto& v : by_sector)
            for (auto i : v) total_n += rows[i].n;
        for (std::size_t k = 0; k < reps; ++k) {
            std::string where = key.country + (key.province.empty() ? "" : "/" + key.province) + ", " +
                                std::string(to_string(key.method)) + ", " + csv::format_double(key.year);
            if (k >= by_sector[0].size() || k >= by_sector[1].size() || k >= by_sector[2].size()) {
                out.warnings.push_back("rejected group (" + where + "): not all three sectors present");
                continue;
            }
            const double sum = rows[by_sector[0][k]].proportion + rows[by_sector[1][k]].proportion +
                               rows[by_sector[2][k]].proportion;
            if (std::abs(sum - 1.0) > kSectorSumTolerance) {
                out.warnings.push_back("rejected group (" + where + "): sector proportions sum to " +
                                       csv::format_double(sum));
                continue;
            }
            for (int s = 0; s < 3; ++s) {
                auto& o = rows[by_sector[s][k]];
                if (o.se == 0.0) {
                    const long denom = reps > 1 ? o.n : total_n;
                    const double binom =
                        denom > 0 ? std::sqrt(o.proportion * (1.0 - o.proportion) / static_cast<double>(denom)) : 0.0;
                    o.se = std::max(kSeFloor, binom);
                    ++floored;
                }
                keep[by_sector[s][k]] = 1;
            }
        }
    }

    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (keep[i]) out.rows.push_back(std::move(rows[i]));
    }
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const SurveyObservation& a, const SurveyObservation& b) {
        return std::tie(a.country, a.province, a.method, a.avg_year, a.sector) <
               std::tie(b.country, b.province, b.method, b.avg_year, b.sector);
    });

    if (dropped_missing) out.warnings.push_back(std::to_string(dropped_missing) + " row(s) with missing proportion dropped");
    if (dropped_fp) out.warnings.push_back(std::to_string(dropped_fp) + " row(s) from non-FP2030 countries dropped");
    if (floored) out.warnings.push_back(std::to_string(floored) + " zero standard error(s) replaced by the SE floor");
    if (settings.local && out.rows.empty()) {
        throw InsufficientDataError("no usable rows for mycountry '" + *settings.mycountry + "'");
    }

    // Dense geography for the countries in use.
    std::vector<std::string> used;
    for (const auto& r : out.rows) {
        if (std::find(used.begin(), used.end(), r.country) == used.end()) used.push_back(r.country);
    }
    out.geography = geography.subset(used);
    for (const auto& r : out.rows) {
        if (!r.province.empty()) out.geography.add_province(r.country, r.province);
    }
    return out;
}

CleanDataset load_survey_data(const IngestSettings& settings, const GeographyIndex& geography) {
    std::string path = settings.source;
    if (path.empty() || path == "builtin") {
        path = std::string(SUPPLYSHARE_DATA_DIR) +
               (settings.national ? "/fixture/national_survey.csv" : "/fixture/subnational_survey.csv");
    }
    return ingest_table(csv::read_file(path), settings, geography);
}

CleanDataset load_survey_data(const IngestSettings& settings) {
    return load_survey_data(settings, GeographyIndex::builtin());
}

std::string to_canonical_csv(const std::vector<SurveyObservation>& rows) {
    std::ostringstream out;
    csv::write_row(out, {"Country", "Region", "Method", "average_year", "sector_categories", "proportion",
                         "SE.proportion", "n"});
    for (const auto& r : rows) {
        csv::write_row(out, {r.country, r.province, std::string(to_string(r.method)), csv::format_double(r.avg_year),
                             std::string(to_string(r.sector)), csv::format_double(r.proportion),
                             csv::format_double(r.se), std::to_string(r.n)});
    }
    return out.str();
}

std::string population_name(std::string_view country, std::string_view province) {
    if (province.empty()) return std::string(country);
    return std::string(country) + "/" + std::string(province);
}

// ---------------------------------------------------------------------------
// Logit observations

LogitValue ratio_logit(double p2, double p3, double se2) {
    const double total = p2 + p3;
    if (!(total > 0.0)) throw DegenerateCompositionError("private-sector total is zero; ratio undefined");
    const double r = p2 / total;
    const double rc = clamp_proportion(r);
    LogitValue v;
    v.sector = 1;
    v.y = logit(rc);
    v.var = delta_method_var(rc, se2 / total);
    v.clamped = rc != r;
    return v;
}

LogitConversion to_logit_obs(const SectorTriple& group) {
    LogitConversion out;
    const double p1 = group.p[0];
    const double c1 = clamp_proportion(p1);
    LogitValue first;
    first.sector = 0;
    first.y = logit(c1);
    first.var = delta_method_var(c1, group.se[0]);
    first.clamped = c1 != p1;
    out.values.push_back(first);
    if (group.p[1] + group.p[2] > 0.0) {
        out.values.push_back(ratio_logit(group.p[1], group.p[2], group.se[1]));
    } else {
        out.ratio_omitted = true;
    }
    return out;
}

}  // namespace supplyshare
