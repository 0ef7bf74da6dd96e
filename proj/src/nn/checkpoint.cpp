#include "dnmx/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "dnmx/core/error.hpp"

namespace dnmx::nn {

namespace {

constexpr std::string_view kMagic = "DNMXCKPT";

template <class U>
void put(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& origin) : b_(bytes), origin_(origin) {}

    template <class U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) {
        if (b_.size() - pos_ < n) throw DataError(origin_ + ": truncated checkpoint at byte " + std::to_string(pos_));
    }
    const std::string& b_;
    const std::string& origin_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const Json& header, const std::vector<Param*>& params) {
    std::string out(kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string h = header.dump();
    put<std::uint64_t>(out, h.size());
    out += h;
    put<std::uint64_t>(out, params.size());
    for (const Param* p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out += p->name;
        put<std::uint32_t>(out, 2);
        put<std::uint64_t>(out, p->value.rows);
        put<std::uint64_t>(out, p->value.cols);
        for (double v : p->value.data) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
    Reader r(bytes, origin);
    if (r.bytes(kMagic.size()) != kMagic) throw DataError(origin + ": not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const auto hlen = r.get<std::uint64_t>();
    try {
        ck.header = Json::parse(r.bytes(hlen));
    } catch (const Json::parse_error& e) {
        throw DataError(origin + ": bad checkpoint header: " + e.what());
    }
    const auto n = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto nlen = r.get<std::uint32_t>();
        std::string name = r.bytes(nlen);
        const auto rank = r.get<std::uint32_t>();
        if (rank != 2) throw DataError(origin + ": tensor " + name + " has rank " + std::to_string(rank));
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        Matrix m(rows, cols);
        for (auto& v : m.data) v = std::bit_cast<double>(r.get<std::uint64_t>());
        ck.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (!r.done()) throw DataError(origin + ": trailing bytes after checkpoint");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Json& header, const std::vector<Param*>& params) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file(path, encode_checkpoint(header, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    require_exists(path);
    return decode_checkpoint(read_file(path), path.string());
}

void restore_params(const Checkpoint& ckpt, const std::vector<Param*>& params) {
    std::map<std::string, const Matrix*> byname;
    for (const auto& [name, m] : ckpt.tensors) byname[name] = &m;
    for (Param* p : params) {
        const auto it = byname.find(p->name);
        if (it == byname.end()) throw DataError("checkpoint has no tensor " + p->name);
        if (it->second->rows != p->value.rows || it->second->cols != p->value.cols) {
            throw DataError("checkpoint tensor " + p->name + " is " + std::to_string(it->second->rows) + "x" +
                            std::to_string(it->second->cols) + ", model expects " + std::to_string(p->value.rows) +
                            "x" + std::to_string(p->value.cols));
        }
        p->value = *it->second;
        p->grad = Matrix(p->value.rows, p->value.cols);
    }
}

} // namespace dnmx::nn
