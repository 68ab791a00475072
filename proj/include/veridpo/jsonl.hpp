#pragma once

// Line-delimited JSON IO. Record files may start with a header record
// {"record":"header", ...} carrying the config hash of the producing run;
// read_jsonl skips it unless asked to keep it.

#include <functional>
#include <string>

#include <json.hpp>

namespace veridpo::jsonl {

using json = nlohmann::json;

struct LineError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

// Calls `fn(line_number, record)` per parsed record. Malformed lines are
// reported through `on_error` (skipped) instead of aborting the stream.
void for_each(const std::string& path,
              const std::function<void(std::size_t, const json&)>& fn,
              const std::function<void(const LineError&)>& on_error,
              bool skip_header = true);

// Throwing variant: first malformed line raises std::runtime_error.
void for_each_strict(const std::string& path,
                     const std::function<void(std::size_t, const json&)>& fn,
                     bool skip_header = true);

class Writer {
public:
    explicit Writer(const std::string& path);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void header(const std::string& format, const std::string& config_hash);
    void write(const json& record);
    void close();

private:
    struct Impl;
    Impl* impl_;
};

bool is_header(const json& record);

}  // namespace veridpo::jsonl
