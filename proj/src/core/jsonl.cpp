#include "dnmx/core/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "dnmx/core/error.hpp"

namespace dnmx {

namespace fs = std::filesystem;

void require_exists(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("missing upstream artifact: " + path.string());
}

std::string read_file(const fs::path& path) {
    require_exists(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void read_jsonl(const fs::path& path,
                const std::function<void(const Json&, std::size_t)>& on_record) {
    require_exists(path);
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json record;
        try {
            record = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        on_record(record, line_no);
    }
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    write_file(path, out);
}

Json read_json(const fs::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& value) {
    write_file(path, value.dump(2) + "\n");
}

} // namespace dnmx
