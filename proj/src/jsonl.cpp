#include "veridpo/jsonl.hpp"

#include <fstream>
#include <stdexcept>

#include "veridpo/util.hpp"

namespace veridpo::jsonl {

bool is_header(const json& record) {
    return record.is_object() && record.contains("record") && record["record"] == "header";
}

void for_each(const std::string& path,
              const std::function<void(std::size_t, const json&)>& fn,
              const std::function<void(const LineError&)>& on_error,
              bool skip_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) {
            on_error({lineno, "invalid JSON"});
            continue;
        }
        if (skip_header && is_header(rec)) continue;
        fn(lineno, rec);
    }
}

void for_each_strict(const std::string& path,
                     const std::function<void(std::size_t, const json&)>& fn,
                     bool skip_header) {
    for_each(
        path, fn,
        [&](const LineError& e) {
            throw std::runtime_error(path + ":" + std::to_string(e.line) + ": " + e.message);
        },
        skip_header);
}

struct Writer::Impl {
    std::ofstream out;
};

Writer::Writer(const std::string& path) : impl_(new Impl) {
    impl_->out.open(path, std::ios::binary);  // binary: byte-identical artifacts
    if (!impl_->out) {
        delete impl_;
        throw std::runtime_error("cannot write " + path);
    }
}

Writer::~Writer() { delete impl_; }

void Writer::header(const std::string& format, const std::string& config_hash) {
    json h{{"record", "header"}, {"format", format}, {"config_hash", config_hash}};
    write(h);
}

void Writer::write(const json& record) { impl_->out << record.dump() << '\n'; }

void Writer::close() { impl_->out.close(); }

}  // namespace veridpo::jsonl
