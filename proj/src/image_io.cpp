#include "holo/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace holo {

namespace {

[[noreturn]] void pfm_fail(const std::string& path, const std::string& what, size_t offset) {
    throw std::runtime_error(path + ": " + what + " at byte " + std::to_string(offset));
}

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    in.seekg(0, std::ios::end);
    std::vector<char> buf(static_cast<size_t>(in.tellg()));
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    return buf;
}

// Whitespace-delimited header token. PFM headers are three tokens separated
// by single whitespace characters (commonly newlines).
std::string next_token(const std::vector<char>& buf, size_t& pos) {
    while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    return std::string(buf.begin() + static_cast<long>(start), buf.begin() + static_cast<long>(pos));
}

uint8_t quantize8(double v) {
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
}

struct PngCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    bool writing = false;
    ~PngCloser() {
        if (png) {
            if (writing)
                png_destroy_write_struct(&png, info ? &info : nullptr);
            else
                png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        }
        if (fp) std::fclose(fp);
    }
};

}  // namespace

void save_pfm(const std::string& path, const Tensor& img) {
    if (img.ndim() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw std::invalid_argument("save_pfm: expected (1,h,w) or (3,h,w), got " + img.shape_str());
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << (c == 3 ? "PF" : "Pf") << "\n" << w << " " << h << "\n" << "-1.0" << "\n";
    std::vector<float> row(static_cast<size_t>(w) * c);
    for (int x = h - 1; x >= 0; --x) {  // bottom-to-top
        for (int y = 0; y < w; ++y)
            for (int ch = 0; ch < c; ++ch)
                row[static_cast<size_t>(y) * c + ch] = static_cast<float>(img.at(ch, x, y));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

Tensor load_pfm(const std::string& path) {
    std::vector<char> buf = read_all(path);
    size_t pos = 0;
    std::string magic = next_token(buf, pos);
    if (magic != "PF" && magic != "Pf") pfm_fail(path, "missing or bad PFM magic", 0);
    const int c = magic == "PF" ? 3 : 1;

    size_t field_at = pos;
    std::string tok = next_token(buf, pos);
    int w = std::atoi(tok.c_str());
    if (tok.empty() || w <= 0) pfm_fail(path, "missing width field", field_at);
    field_at = pos;
    tok = next_token(buf, pos);
    int h = std::atoi(tok.c_str());
    if (tok.empty() || h <= 0) pfm_fail(path, "missing height field", field_at);
    field_at = pos;
    tok = next_token(buf, pos);
    if (tok.empty()) pfm_fail(path, "missing scale field", field_at);
    double scale = std::atof(tok.c_str());
    if (scale == 0.0) pfm_fail(path, "bad scale field", field_at);
    if (pos >= buf.size()) pfm_fail(path, "missing pixel data", pos);
    ++pos;  // single whitespace terminates the header

    const bool little_endian = scale < 0.0;
    const size_t need = static_cast<size_t>(w) * h * c * sizeof(float);
    if (buf.size() - pos < need)
        pfm_fail(path, "truncated pixel data (" + std::to_string(buf.size() - pos) + " of " +
                           std::to_string(need) + " bytes)",
                 pos);

    Tensor img({c, h, w});
    for (int x = h - 1; x >= 0; --x) {
        for (int y = 0; y < w; ++y) {
            for (int ch = 0; ch < c; ++ch) {
                uint8_t b[4];
                std::memcpy(b, buf.data() + pos, 4);
                pos += 4;
                if (!little_endian) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
                float f;
                std::memcpy(&f, b, 4);
                img.at(ch, x, y) = f;
            }
        }
    }
    return img;
}

void save_png(const std::string& path, const Tensor& img) {
    if (img.ndim() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw std::invalid_argument("save_png: expected (1,h,w) or (3,h,w), got " + img.shape_str());
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);

    PngCloser pc;
    pc.writing = true;
    pc.fp = std::fopen(path.c_str(), "wb");
    if (!pc.fp) throw std::runtime_error(path + ": cannot open for writing");
    pc.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    pc.info = png_create_info_struct(pc.png);
    if (!pc.png || !pc.info || setjmp(png_jmpbuf(pc.png)))
        throw std::runtime_error(path + ": libpng write error");

    png_init_io(pc.png, pc.fp);
    png_set_IHDR(pc.png, pc.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(pc.png, pc.info);

    std::vector<uint8_t> row(static_cast<size_t>(w) * c);
    for (int x = 0; x < h; ++x) {
        for (int y = 0; y < w; ++y)
            for (int ch = 0; ch < c; ++ch)
                row[static_cast<size_t>(y) * c + ch] = quantize8(img.at(ch, x, y));
        png_write_row(pc.png, row.data());
    }
    png_write_end(pc.png, nullptr);
}

Tensor load_png(const std::string& path) {
    PngCloser pc;
    pc.fp = std::fopen(path.c_str(), "rb");
    if (!pc.fp) throw std::runtime_error(path + ": cannot open for reading");
    pc.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    pc.info = png_create_info_struct(pc.png);
    if (!pc.png || !pc.info || setjmp(png_jmpbuf(pc.png)))
        throw std::runtime_error(path + ": libpng read error");

    png_init_io(pc.png, pc.fp);
    png_read_info(pc.png, pc.info);

    png_set_expand(pc.png);          // palettes, <8-bit gray, tRNS
    png_set_strip_16(pc.png);
    png_set_strip_alpha(pc.png);
    png_read_update_info(pc.png, pc.info);

    const int w = static_cast<int>(png_get_image_width(pc.png, pc.info));
    const int h = static_cast<int>(png_get_image_height(pc.png, pc.info));
    const int c = static_cast<int>(png_get_channels(pc.png, pc.info));
    if (c != 1 && c != 3) throw std::runtime_error(path + ": unsupported channel count");

    std::vector<uint8_t> row(static_cast<size_t>(w) * c);
    Tensor img({c, h, w});
    for (int x = 0; x < h; ++x) {
        png_read_row(pc.png, row.data(), nullptr);
        for (int y = 0; y < w; ++y)
            for (int ch = 0; ch < c; ++ch)
                img.at(ch, x, y) = row[static_cast<size_t>(y) * c + ch] / 255.0;
    }
    return img;
}

void save_png_mask(const std::string& path, const Tensor& mask) {
    if (mask.ndim() != 3 || mask.dim(0) != 1)
        throw std::invalid_argument("save_png_mask: expected (1,h,w), got " + mask.shape_str());
    const int h = mask.dim(1), w = mask.dim(2);

    PngCloser pc;
    pc.writing = true;
    pc.fp = std::fopen(path.c_str(), "wb");
    if (!pc.fp) throw std::runtime_error(path + ": cannot open for writing");
    pc.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    pc.info = png_create_info_struct(pc.png);
    if (!pc.png || !pc.info || setjmp(png_jmpbuf(pc.png)))
        throw std::runtime_error(path + ": libpng write error");

    png_init_io(pc.png, pc.fp);
    png_set_IHDR(pc.png, pc.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 1,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(pc.png, pc.info);

    std::vector<uint8_t> row((static_cast<size_t>(w) + 7) / 8);
    for (int x = 0; x < h; ++x) {
        std::fill(row.begin(), row.end(), 0);
        for (int y = 0; y < w; ++y) {
            double v = mask.at(0, x, y);
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("save_png_mask: mask value not binary");
            if (v == 1.0) row[static_cast<size_t>(y) / 8] |= static_cast<uint8_t>(0x80 >> (y % 8));
        }
        png_write_row(pc.png, row.data());
    }
    png_write_end(pc.png, nullptr);
}

Tensor load_png_mask(const std::string& path) {
    Tensor img = load_png(path);
    if (img.dim(0) != 1) throw std::runtime_error(path + ": mask PNG must be grayscale");
    for (double& v : img.data) v = v > 0.5 ? 1.0 : 0.0;
    return img;
}

}  // namespace holo
