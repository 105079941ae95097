#include "fedseg/weights_io.hpp"

#include "fedseg/crc32.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedseg {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("ivwt: truncated data");
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(buf[pos] | (buf[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
};

} // namespace

std::vector<uint8_t> ivwt_encode(const ModelParams& params) {
    std::vector<uint8_t> out;
    out.reserve(16 + static_cast<size_t>(params.total_values()) * 4);
    out.insert(out.end(), {'I', 'V', 'W', 'T'});
    put_u32(out, 1); // version
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params.items) {
        if (name.size() > 0xFFFF) throw std::invalid_argument("ivwt: tensor name too long");
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<uint8_t>(t.rank()));
        for (int e : t.shape) put_u32(out, static_cast<uint32_t>(e));
        const size_t off = out.size();
        out.resize(off + t.data.size() * 4);
        std::memcpy(out.data() + off, t.data.data(), t.data.size() * 4);
    }
    put_u32(out, crc32(out.data(), out.size()));
    return out;
}

ModelParams ivwt_decode(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 16) throw std::runtime_error("ivwt: data too short");
    const uint32_t stored_crc = static_cast<uint32_t>(bytes[bytes.size() - 4]) |
                                (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
                                (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
                                (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
        throw std::runtime_error("ivwt: CRC mismatch");

    Reader r{bytes};
    if (r.u8() != 'I' || r.u8() != 'V' || r.u8() != 'W' || r.u8() != 'T')
        throw std::runtime_error("ivwt: bad magic");
    const uint32_t version = r.u32();
    if (version != 1) throw std::runtime_error("ivwt: unsupported version " + std::to_string(version));
    const uint32_t count = r.u32();

    ModelParams params;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        r.need(name_len);
        std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
        r.pos += name_len;
        const uint8_t rank = r.u8();
        if (rank < 1 || rank > 4) throw std::runtime_error("ivwt: bad tensor rank");
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            const uint32_t e = r.u32();
            if (e == 0 || e > 0x7FFFFFFFu) throw std::runtime_error("ivwt: bad extent");
            shape[d] = static_cast<int>(e);
            numel *= e;
        }
        r.need(static_cast<size_t>(numel) * 4);
        Tensor t(shape);
        std::memcpy(t.data.data(), bytes.data() + r.pos, static_cast<size_t>(numel) * 4);
        r.pos += static_cast<size_t>(numel) * 4;
        params.add(name, std::move(t));
    }
    if (r.pos != bytes.size() - 4) throw std::runtime_error("ivwt: trailing bytes");
    return params;
}

void ivwt_save(const ModelParams& params, const std::string& path) {
    const std::vector<uint8_t> bytes = ivwt_encode(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("ivwt: cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("ivwt: write failed for " + path);
}

ModelParams ivwt_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("ivwt: cannot open " + path);
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw std::runtime_error("ivwt: read failed for " + path);
    return ivwt_decode(bytes);
}

} // namespace fedseg
