#include "ctfa/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ctfa/errors.hpp"

namespace ctfa {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'F', 'A', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string get_string(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated data");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const ComplexTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e.tensor;
    }
    return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata.size()));
    out += checkpoint.metadata;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.entries.size()));
    for (const auto& e : checkpoint.entries) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
        for (auto d : e.tensor.shape()) put<std::uint64_t>(out, d);
        for (double v : e.tensor.re()) put<double>(out, v);
        for (double v : e.tensor.im()) put<double>(out, v);
    }
    return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw DataError("checkpoint: bad magic");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.metadata = r.get_string(r.get<std::uint32_t>());
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        e.name = r.get_string(r.get<std::uint32_t>());
        const auto rank = r.get<std::uint32_t>();
        if (rank > 16) throw DataError("checkpoint: implausible rank for " + e.name);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        const std::size_t n = numel(shape);
        std::vector<double> re(n), im(n);
        for (auto& v : re) v = r.get<double>();
        for (auto& v : im) v = r.get<double>();
        e.tensor = ComplexTensor(std::move(shape), std::move(re), std::move(im));
        ck.entries.push_back(std::move(e));
    }
    if (!r.done()) throw DataError("checkpoint: trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    const std::string bytes = serialize_checkpoint(checkpoint);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_checkpoint(bytes);
    } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " (" + path.string() + ")");
    }
}

}  // namespace ctfa
