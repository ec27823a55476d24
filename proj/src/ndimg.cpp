#include "msgan/ndimg.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "NDIMG payload io assumes a little-endian host");

namespace msgan {

namespace {

[[noreturn]] void fail(IoErrorKind k, const std::string& msg) { throw IoError(k, msg); }

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads one header line (up to '\n'); false on EOF before any byte.
bool read_line(std::FILE* f, std::string& out) {
    out.clear();
    int c;
    bool any = false;
    while ((c = std::fgetc(f)) != EOF) {
        any = true;
        if (c == '\n') return true;
        out.push_back(static_cast<char>(c));
    }
    return any;
}

void split_kv(const std::string& line, std::string& key, std::string& value) {
    auto pos = line.find('=');
    if (pos == std::string::npos)
        fail(IoErrorKind::malformed_header, "header line without '=': '" + line + "'");
    auto trim = [](std::string s) {
        size_t b = s.find_first_not_of(" \t\r");
        size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    key = trim(line.substr(0, pos));
    value = trim(line.substr(pos + 1));
    if (key.empty()) fail(IoErrorKind::malformed_header, "empty header key");
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

Volume load_volume(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail(IoErrorKind::open_failed, "cannot open '" + path + "'");

    Volume v;
    bool have_ndim = false, have_shape = false, have_spacing = false, have_dtype = false;
    std::vector<long long> shape_vals;
    std::vector<double> spacing_vals;

    std::string line;
    bool saw_data = false;
    while (read_line(fp.get(), line)) {
        // strip trailing CR for robustness
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "data:") {
            saw_data = true;
            break;
        }
        if (line.empty()) continue;
        std::string key, value;
        split_kv(line, key, value);
        std::istringstream iss(value);
        if (key == "ndim") {
            long long nd;
            if (!(iss >> nd) || !(iss >> std::ws).eof())
                fail(IoErrorKind::malformed_header, "bad value for 'ndim': '" + value + "'");
            if (nd != 2 && nd != 3)
                fail(IoErrorKind::unsupported_ndim,
                     "field 'ndim' must be 2 or 3, got " + std::to_string(nd));
            v.ndim = static_cast<int>(nd);
            have_ndim = true;
        } else if (key == "shape") {
            long long s;
            while (iss >> s) shape_vals.push_back(s);
            if (!iss.eof() || shape_vals.empty())
                fail(IoErrorKind::malformed_header, "bad value for 'shape': '" + value + "'");
            have_shape = true;
        } else if (key == "spacing") {
            double s;
            while (iss >> s) spacing_vals.push_back(s);
            if (!iss.eof() || spacing_vals.empty())
                fail(IoErrorKind::malformed_header, "bad value for 'spacing': '" + value + "'");
            have_spacing = true;
        } else if (key == "dtype") {
            if (value != "f32le")
                fail(IoErrorKind::unsupported_dtype,
                     "field 'dtype' must be f32le, got '" + value + "'");
            have_dtype = true;
        } else {
            fail(IoErrorKind::malformed_header, "unknown header key '" + key + "'");
        }
    }
    if (!saw_data) fail(IoErrorKind::malformed_header, "missing 'data:' terminator");
    if (!have_ndim) fail(IoErrorKind::malformed_header, "missing header key 'ndim'");
    if (!have_shape) fail(IoErrorKind::malformed_header, "missing header key 'shape'");
    if (!have_spacing) fail(IoErrorKind::malformed_header, "missing header key 'spacing'");
    if (!have_dtype) fail(IoErrorKind::malformed_header, "missing header key 'dtype'");

    if (shape_vals.size() != static_cast<size_t>(v.ndim))
        fail(IoErrorKind::malformed_header,
             "field 'shape' has " + std::to_string(shape_vals.size()) + " entries, ndim is " +
                 std::to_string(v.ndim));
    if (spacing_vals.size() != static_cast<size_t>(v.ndim))
        fail(IoErrorKind::malformed_header,
             "field 'spacing' has " + std::to_string(spacing_vals.size()) + " entries, ndim is " +
                 std::to_string(v.ndim));
    for (int a = 0; a < v.ndim; ++a) {
        if (shape_vals[a] <= 0)
            fail(IoErrorKind::malformed_header, "field 'shape' has a non-positive extent");
        v.shape[a] = static_cast<int>(shape_vals[a]);
        v.spacing[a] = spacing_vals[a];
    }

    std::size_t n = Volume::numel_of(v.ndim, v.shape);
    v.data.resize(n);
    std::size_t got = std::fread(v.data.data(), sizeof(float), n, fp.get());
    if (got != n)
        fail(IoErrorKind::truncated_payload, "payload holds " + std::to_string(got) +
                                                 " floats, header declares " + std::to_string(n));
    char extra;
    if (std::fread(&extra, 1, 1, fp.get()) == 1)
        fail(IoErrorKind::trailing_payload, "payload longer than the declared shape");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(v.data[i]))
            fail(IoErrorKind::nonfinite_data, "payload contains a non-finite value");
    return v;
}

void save_volume(const Volume& v, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail(IoErrorKind::open_failed, "cannot open '" + path + "' for writing");

    std::string header;
    header += "ndim = " + std::to_string(v.ndim) + "\n";
    header += "shape =";
    for (int a = 0; a < v.ndim; ++a) header += " " + std::to_string(v.shape[a]);
    header += "\nspacing =";
    for (int a = 0; a < v.ndim; ++a) header += " " + format_double(v.spacing[a]);
    header += "\ndtype = f32le\ndata:\n";

    if (std::fwrite(header.data(), 1, header.size(), fp.get()) != header.size() ||
        std::fwrite(v.data.data(), sizeof(float), v.data.size(), fp.get()) != v.data.size())
        fail(IoErrorKind::open_failed, "short write to '" + path + "'");
}

}  // namespace msgan
