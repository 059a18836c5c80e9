#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "noma/common.hpp"

namespace noma {

// Versioned binary container:
//   magic[8] | kind u32 | version u32 | payload_size u64 | payload | fnv1a64(payload)
// All integers and doubles little-endian (asserted at build time for the
// targets we care about). Load failures are distinguishable: wrong version,
// short file, corrupted payload.

inline constexpr char kBinMagic[8] = {'N', 'O', 'M', 'A', 'B', 'I', 'N', '1'};

enum class BinKind : uint32_t { scenario = 1, dataset = 2, model = 3 };

class BinWriter {
public:
    void u8(uint8_t v) { put(&v, 1); }
    void u32(uint32_t v) { put(&v, 4); }
    void u64(uint64_t v) { put(&v, 8); }
    void i32(int32_t v) { put(&v, 4); }
    void f64(double v) { put(&v, 8); }
    void f64_array(const double* p, size_t n) { put(p, 8 * n); }
    void u64_array(const uint64_t* p, size_t n) { put(p, 8 * n); }

    void write_file(const std::string& path, BinKind kind, uint32_t version) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + path);
        out.write(kBinMagic, 8);
        uint32_t k = static_cast<uint32_t>(kind);
        out.write(reinterpret_cast<const char*>(&k), 4);
        out.write(reinterpret_cast<const char*>(&version), 4);
        uint64_t n = buf_.size();
        out.write(reinterpret_cast<const char*>(&n), 8);
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        uint64_t sum = fnv1a64(buf_.data(), buf_.size());
        out.write(reinterpret_cast<const char*>(&sum), 8);
        if (!out) throw IoError("write failed: " + path);
    }

private:
    void put(const void* p, size_t n) {
        const char* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    std::vector<char> buf_;
};

class BinReader {
public:
    BinReader(const std::string& path, BinKind kind, uint32_t version) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open: " + path);
        std::vector<char> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (all.size() < 24) throw FileTruncatedError("file shorter than header: " + path);
        if (std::memcmp(all.data(), kBinMagic, 8) != 0) throw IoError("bad magic: " + path);
        uint32_t k, v;
        std::memcpy(&k, all.data() + 8, 4);
        std::memcpy(&v, all.data() + 12, 4);
        if (k != static_cast<uint32_t>(kind) || v != version)
            throw FileVersionError("unsupported file kind/version in " + path);
        uint64_t n;
        std::memcpy(&n, all.data() + 16, 8);
        if (all.size() < 24 + n + 8) throw FileTruncatedError("payload cut short: " + path);
        uint64_t declared;
        std::memcpy(&declared, all.data() + 24 + n, 8);
        if (fnv1a64(all.data() + 24, n) != declared)
            throw FileChecksumError("checksum mismatch: " + path);
        buf_.assign(all.begin() + 24, all.begin() + 24 + static_cast<ptrdiff_t>(n));
    }

    uint8_t u8() { uint8_t v; get(&v, 1); return v; }
    uint32_t u32() { uint32_t v; get(&v, 4); return v; }
    uint64_t u64() { uint64_t v; get(&v, 8); return v; }
    int32_t i32() { int32_t v; get(&v, 4); return v; }
    double f64() { double v; get(&v, 8); return v; }
    void f64_array(double* p, size_t n) { get(p, 8 * n); }
    void u64_array(uint64_t* p, size_t n) { get(p, 8 * n); }

private:
    void get(void* p, size_t n) {
        if (pos_ + n > buf_.size()) throw FileTruncatedError("structure overruns payload");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::vector<char> buf_;
    size_t pos_ = 0;
};

}  // namespace noma
