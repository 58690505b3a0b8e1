#include "convert_trace.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blocksim/error.h"
#include "blocksim/log.h"

namespace blocksim {

using nlohmann::json;

namespace {

std::optional<TokenCount> count_field(const json& j, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (j.contains(name) && j.at(name).is_number()) {
      return j.at(name).get<TokenCount>();
    }
  }
  return std::nullopt;
}

TokenCount approx_tokens(const std::string& text, double chars_per_token) {
  return std::max<TokenCount>(
      1, static_cast<TokenCount>(std::ceil(static_cast<double>(text.size()) / chars_per_token)));
}

std::optional<TraceRecord> convert_conversation(const json& entry, std::uint64_t id,
                                                double chars_per_token) {
  TraceRecord record;
  record.id = id;

  const auto prompt = count_field(entry, {"prompt_tokens", "num_prompt_tokens", "input_length"});
  const auto output = count_field(entry, {"output_tokens", "num_output_tokens", "output_length"});
  if (prompt && output) {
    record.prompt_tokens = *prompt;
    record.output_tokens = *output;
  } else if (entry.contains("conversations") && entry.at("conversations").is_array()) {
    std::string human, gpt;
    for (const json& turn : entry.at("conversations")) {
      if (!turn.contains("from") || !turn.contains("value")) continue;
      const std::string from = turn.at("from").get<std::string>();
      if (human.empty() && (from == "human" || from == "user")) {
        human = turn.at("value").get<std::string>();
      } else if (!human.empty() && gpt.empty() && (from == "gpt" || from == "assistant")) {
        gpt = turn.at("value").get<std::string>();
      }
    }
    if (human.empty() || gpt.empty()) return std::nullopt;
    record.prompt_tokens = approx_tokens(human, chars_per_token);
    record.output_tokens = approx_tokens(gpt, chars_per_token);
  } else {
    return std::nullopt;
  }
  if (record.prompt_tokens < 1 || record.output_tokens < 1) return std::nullopt;

  const auto estimated =
      count_field(entry, {"estimated_output_tokens", "predicted_length", "estimated_length"});
  if (estimated && *estimated >= 1) record.estimated_output_tokens = *estimated;
  return record;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  return cells;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::vector<TraceRecord> convert_sharegpt(const std::string& text, double chars_per_token) {
  std::vector<TraceRecord> records;
  std::uint64_t next_id = 0;
  int skipped = 0;

  json root = json::parse(text, nullptr, false);
  if (root.is_array()) {
    for (const json& entry : root) {
      if (auto record = convert_conversation(entry, next_id, chars_per_token)) {
        records.push_back(*record);
        ++next_id;
      } else {
        ++skipped;
      }
    }
  } else {
    // JSONL fallback: one conversation object per line.
    std::istringstream in(text);
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json entry = json::parse(line, nullptr, false);
      if (entry.is_discarded()) throw TraceParseError(line_number, "malformed JSON");
      if (auto record = convert_conversation(entry, next_id, chars_per_token)) {
        records.push_back(*record);
        ++next_id;
      } else {
        ++skipped;
      }
    }
  }
  if (skipped > 0) {
    BLOCKSIM_LOG_INFO << "convert_sharegpt skipped " << skipped
                      << " conversations without a prompt/response pair";
  }
  return records;
}

std::vector<TraceRecord> convert_burstgpt(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw TraceParseError(1, "empty file");

  const std::vector<std::string> header = split_csv_line(line);
  int timestamp_col = -1, request_col = -1, response_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = lowercase(header[i]);
    if (name.find("timestamp") != std::string::npos) timestamp_col = static_cast<int>(i);
    if (name.find("request") != std::string::npos && name.find("token") != std::string::npos) {
      request_col = static_cast<int>(i);
    }
    if (name.find("response") != std::string::npos && name.find("token") != std::string::npos) {
      response_col = static_cast<int>(i);
    }
  }
  if (request_col < 0 || response_col < 0) {
    throw TraceParseError(1, "need Request tokens and Response tokens columns");
  }

  std::vector<TraceRecord> records;
  std::uint64_t next_id = 0;
  std::optional<double> first_timestamp;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    const int needed = std::max({timestamp_col, request_col, response_col});
    if (static_cast<int>(cells.size()) <= needed) {
      throw TraceParseError(line_number, "short row");
    }
    try {
      TraceRecord record;
      record.id = next_id;
      record.prompt_tokens = static_cast<TokenCount>(std::stol(cells[request_col]));
      record.output_tokens = static_cast<TokenCount>(std::stol(cells[response_col]));
      if (record.prompt_tokens < 1 || record.output_tokens < 1) continue;  // malformed entry
      if (timestamp_col >= 0) {
        const double timestamp = std::stod(cells[timestamp_col]);
        if (!first_timestamp) first_timestamp = timestamp;
        record.arrival_offset_s = timestamp - *first_timestamp;
      }
      records.push_back(record);
      ++next_id;
    } catch (const std::exception&) {
      throw TraceParseError(line_number, "non-numeric cell");
    }
  }
  return records;
}

}  // namespace blocksim
