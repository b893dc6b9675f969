#pragma once

// File formats. Datasets and reports are JSON-lines; tables are CSV with a
// leading "# schema=..." comment line. Wall-clock metadata only ever appears
// in the first line of a file so that payloads are byte-comparable.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eqrc/experiments.hpp"
#include "eqrc/inequalities.hpp"
#include "eqrc/statistics.hpp"

namespace eqrc {

inline constexpr int kFileSchemaVersion = 1;

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

// ISO-8601 UTC timestamp of the current wall-clock time.
std::string utc_now();

nlohmann::json setting_to_json(const Setting& s);
Setting setting_from_json(const nlohmann::json& j);

nlohmann::json gauge_to_json(const GaugeKey& key);
GaugeKey gauge_from_json(const nlohmann::json& j);

// One record line of a dataset file.
std::string record_line(const TaggedRecord& r);
TaggedRecord parse_record_line(const std::string& line);

struct WriteOptions {
    // Written into the header line; omitted when empty.
    std::string created_utc;
};

void write_dataset(std::ostream& os, const RunDataset& ds, const WriteOptions& opts = {});
RunDataset read_dataset(std::istream& is);

// Record lines only, in file order; the header is excluded.
std::vector<std::string> dataset_payload(const RunDataset& ds);

nlohmann::json report_to_json(const InequalityReport& r);
std::string report_line(const InequalityReport& r);

void write_sweep_csv(std::ostream& os, std::span<const SweepPoint> points, const WriteOptions& opts = {});

struct SettingRun {
    SettingPair settings;
    ExpectationEstimate estimate;
    std::optional<Marginals> marginals;
};

void write_run_csv(std::ostream& os, std::span<const SettingRun> rows, const WriteOptions& opts = {});
std::string run_json_line(const SettingRun& row);

void write_triples_csv(std::ostream& os, const TripleTable& abc_prime, const TripleTable& ab_prime_c,
                       const WriteOptions& opts = {});

}  // namespace eqrc
