#include "pcalab/mc/checkpoint.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include "pcalab/util/hash.hpp"

namespace pcalab::mc {

namespace {

constexpr std::array<char, 8> kMagic{'P', 'C', 'A', 'L', 'A', 'B', '0', '1'};

void put(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& buf) : buf_(buf) {}
    std::uint64_t get(int bytes) {
        if (pos_ + static_cast<std::size_t>(bytes) > buf_.size()) throw CheckpointError("checkpoint truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    [[nodiscard]] std::size_t pos() const { return pos_; }

private:
    const std::vector<unsigned char>& buf_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::vector<unsigned char> out(kMagic.begin(), kMagic.end());
    put(out, Checkpoint::kVersion, 2);
    put(out, static_cast<std::uint32_t>(ckpt.kind), 4);
    put(out, ckpt.fingerprint, 8);
    put(out, ckpt.seed, 8);
    put(out, ckpt.next_stream, 8);
    put(out, ckpt.target, 8);
    put(out, ckpt.payload.size(), 8);
    for (auto v : ckpt.payload) put(out, v, 8);
    put(out, util::Fnv1a64{}.bytes(out.data(), out.size()).value(), 8);

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write checkpoint " + tmp.string());
        f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!f) throw CheckpointError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < kMagic.size() + 2 || !std::equal(kMagic.begin(), kMagic.end(), buf.begin()))
        throw CheckpointError("bad checkpoint magic in " + path.string());
    Reader r(buf);
    r.get(8);
    const auto version = static_cast<std::uint16_t>(r.get(2));
    if (version != Checkpoint::kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    const auto kind = static_cast<std::uint32_t>(r.get(4));
    if (kind != 1 && kind != 2) throw CheckpointError("unknown checkpoint kind");
    c.kind = static_cast<CheckpointKind>(kind);
    c.fingerprint = r.get(8);
    c.seed = r.get(8);
    c.next_stream = r.get(8);
    c.target = r.get(8);
    const std::uint64_t n = r.get(8);
    if (n > (buf.size() - r.pos()) / 8) throw CheckpointError("checkpoint truncated");
    c.payload.resize(n);
    for (auto& v : c.payload) v = r.get(8);
    const std::size_t body = r.pos();
    const std::uint64_t digest = r.get(8);
    if (digest != util::Fnv1a64{}.bytes(buf.data(), body).value())
        throw CheckpointError("checkpoint checksum mismatch in " + path.string());
    if (r.pos() != buf.size()) throw CheckpointError("trailing bytes in checkpoint");
    return c;
}

}  // namespace pcalab::mc
