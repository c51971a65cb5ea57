#include "deltaflux/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dflx {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'L', 'X'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated tensor file: " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_tensor(const Tensor& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(t.channels));
    write_u32(out, static_cast<uint32_t>(t.height));
    write_u32(out, static_cast<uint32_t>(t.width));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a DFLX tensor file: " + path);
    const uint32_t version = read_u32(in, path);
    if (version != kVersion) throw IoError("unsupported tensor file version: " + path);
    const uint32_t c = read_u32(in, path);
    const uint32_t h = read_u32(in, path);
    const uint32_t w = read_u32(in, path);
    if (c < 1 || h < 1 || w < 1 || static_cast<uint64_t>(c) * h * w > (1ull << 31))
        throw IoError("bad tensor dims in: " + path);
    Tensor t(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw IoError("truncated tensor data: " + path);
    return t;
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch = in.get();
    while (in && (std::isspace(ch) || ch == '#')) {
        if (ch == '#')
            while (in && ch != '\n') ch = in.get();
        ch = in.get();
    }
    while (in && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    if (tok.empty()) throw IoError("bad PNM header: " + path);
    return tok;
}

Tensor load_pnm(const std::string& path, bool color) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    const std::string magic = pnm_token(in, path);
    if (magic != (color ? "P6" : "P5")) throw IoError("unexpected PNM magic in: " + path);
    const int w = std::stoi(pnm_token(in, path));
    const int h = std::stoi(pnm_token(in, path));
    const int maxval = std::stoi(pnm_token(in, path));
    if (w < 1 || h < 1 || maxval != 255) throw IoError("unsupported PNM format: " + path);

    const int channels = color ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("truncated PNM data: " + path);

    Tensor t(channels, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                t.at(c, y, x) =
                    static_cast<float>(raw[(static_cast<size_t>(y) * w + x) * channels + c]) /
                    255.0f;
    return t;
}

void save_pnm(const Tensor& t, const std::string& path, bool color) {
    check(t.channels == (color ? 3 : 1), "save_pnm: wrong channel count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << (color ? "P6" : "P5") << "\n" << t.width << " " << t.height << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(t.width) * t.height * t.channels);
    for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x)
            for (int c = 0; c < t.channels; ++c) {
                const float v = std::min(1.0f, std::max(0.0f, t.at(c, y, x)));
                raw[(static_cast<size_t>(y) * t.width + x) * t.channels + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

Tensor load_ppm(const std::string& path) { return load_pnm(path, true); }
void save_ppm(const Tensor& t, const std::string& path) { save_pnm(t, path, true); }
Tensor load_pgm(const std::string& path) { return load_pnm(path, false); }
void save_pgm(const Tensor& t, const std::string& path) { save_pnm(t, path, false); }

Tensor load_frame(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".ppm") return load_ppm(path);
    if (ext == ".pgm") return load_pgm(path);
    if (ext == ".dflx") return load_tensor(path);
    throw IoError("unknown frame format (expected .ppm/.pgm/.dflx): " + path);
}

std::vector<Homography> load_homographies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<Homography> hs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ss(line);
        Homography h;
        for (int i = 0; i < 9; ++i)
            if (!(ss >> h.m[i]))
                throw IoError("homography line " + std::to_string(hs.size() + 1) +
                              " needs 9 floats: " + path);
        hs.push_back(h);
    }
    if (hs.empty()) throw IoError("no homographies in: " + path);
    return hs;
}

void save_homographies(const std::vector<Homography>& hs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const Homography& h : hs) {
        for (int i = 0; i < 9; ++i) out << h.m[i] << (i == 8 ? "" : " ");
        out << "\n";
    }
}

void dump_buffer(const SphericalBuffer& buf, const TileLedger* ledger, const std::string& path) {
    Tensor t(buf.channels(), buf.spec().pixel_h(), buf.spec().pixel_w());
    t.data = buf.storage();
    save_tensor(t, path);

    std::ofstream side(path + ".tiles.txt");
    if (!side) throw IoError("cannot open for writing: " + path + ".tiles.txt");
    side << "# local_row local_col held_ty held_tx covered\n";
    for (int r = 0; r < buf.spec().rows; ++r)
        for (int c = 0; c < buf.spec().cols; ++c) {
            side << r << " " << c;
            if (ledger && r < ledger->rows() && c < ledger->cols()) {
                const auto& s = ledger->slot_local(r, c);
                if (s.used)
                    side << " " << s.coord.ty << " " << s.coord.tx << " " << (s.covered ? 1 : 0);
                else
                    side << " - - 0";
            } else {
                side << " - - 0";
            }
            side << "\n";
        }
}

}  // namespace dflx
