#pragma once

#include <string>
#include <vector>

#include "blocksim/workload.h"

namespace blocksim {

// ShareGPT-style conversation dumps: a JSON array (or JSONL) of objects
// with a "conversations" list of {from, value} turns. The first human turn
// becomes the prompt, the first gpt turn the output. Token counts come
// from explicit count fields when present, otherwise from a
// chars-per-token approximation of the text.
std::vector<TraceRecord> convert_sharegpt(const std::string& text, double chars_per_token);

// BurstGPT-style length traces: CSV with Timestamp, Request tokens, and
// Response tokens columns; timestamps become arrival offsets relative to
// the first row.
std::vector<TraceRecord> convert_burstgpt(const std::string& text);

}  // namespace blocksim
