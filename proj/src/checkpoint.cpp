#include "kdda/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kdda {

namespace {
constexpr char kMagic[4] = {'D', 'G', 'K', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int b = in.get();
        if (b == EOF) throw std::runtime_error("checkpoint truncated");
        v |= static_cast<std::uint32_t>(b) << (8 * i);
    }
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        const int b = in.get();
        if (b == EOF) throw std::runtime_error("checkpoint truncated");
        v |= static_cast<std::uint64_t>(b) << (8 * i);
    }
    return v;
}
}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    const std::string spec = model.spec();
    put_u32(out, static_cast<std::uint32_t>(spec.size()));
    out.write(spec.data(), static_cast<std::streamsize>(spec.size()));
    put_u64(out, static_cast<std::uint64_t>(model.param_count()));
    for (const Tensor* p : model.params()) {
        for (int i = 0; i < p->size(); ++i) {
            const std::uint64_t bits = std::bit_cast<std::uint64_t>((*p)[i]);
            put_u64(out, bits);
        }
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    const std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t spec_len = get_u32(in);
    std::string spec(spec_len, '\0');
    in.read(spec.data(), spec_len);
    if (!in) throw std::runtime_error("checkpoint truncated in layer spec");
    Model model = Model::from_spec(spec, 0);
    const std::uint64_t count = get_u64(in);
    if (count != static_cast<std::uint64_t>(model.param_count()))
        throw std::runtime_error("checkpoint parameter count mismatch");
    for (Tensor* p : model.params())
        for (int i = 0; i < p->size(); ++i)
            (*p)[i] = std::bit_cast<double>(get_u64(in));
    return model;
}

}  // namespace kdda
