#pragma once

#include <iosfwd>

#include <json.hpp>

#include "sendkit/protocol.hpp"
#include "sendkit/scores.hpp"
#include "sendkit/toy_model.hpp"

namespace sendkit::json_io {

using nlohmann::json;

/// Everything a send-sim run needs. Parsed from
/// {"send": {...}, "model": {...}, "corpus": {...}}; every key is optional
/// and unknown keys are rejected.
struct SimConfig {
  protocol::SenDConfig send;
  toy::ToyModelConfig model;
  toy::CorpusSpec corpus;
};

/// Throws SchemaError whose message starts with the JSON path of the bad field.
SimConfig parse_sim_config(const json& doc);
json to_json(const SimConfig& cfg);
json to_json(const scores::EesConfig& cfg);
json to_json(const scores::ScoreReport& r);
json to_json(const protocol::ComparisonReport& r);

/// One line per checkpoint record.
void write_run_log(std::ostream& out, const protocol::RunLog& log);
/// Parses write_run_log output back into records (without representations or generations).
protocol::RunLog read_run_log(std::istream& in);
json run_summary(const protocol::RunLog& log);

}  // namespace sendkit::json_io
