#include "sflow/io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sflow {

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

float swap_if_big_endian(float v, bool payload_little) {
    // hosts we build on are little-endian; byteswap only for big-endian files
    if (payload_little) return v;
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) | ((bits >> 8) & 0xff00) |
           (bits >> 24);
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

ImageField read_pfm(const std::string& path) {
    const std::string bytes = slurp(path);
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (start == pos) throw std::runtime_error(path + ": truncated PFM header");
        return bytes.substr(start, pos - start);
    };
    const std::string magic = next_token();
    if (magic == "PF")
        throw std::runtime_error(path + ": 3-channel PFM not supported here");
    if (magic != "Pf") throw std::runtime_error(path + ": not a PFM file");
    int w, h;
    double scale;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        scale = std::stod(next_token());
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed PFM header");
    }
    if (w < 1 || h < 1) throw std::runtime_error(path + ": bad PFM dimensions");
    if (scale == 0.0) throw std::runtime_error(path + ": zero PFM scale");
    pos += 1;  // single whitespace byte after the header
    const std::size_t need = static_cast<std::size_t>(w) * h * 4;
    if (bytes.size() - pos < need)
        throw std::runtime_error(path + ": truncated PFM payload");
    const bool little = scale < 0.0;
    ImageField out(w, h, 1);
    for (int row = 0; row < h; ++row) {
        const int y = h - 1 - row;  // payload is bottom-to-top
        const char* src = bytes.data() + pos + static_cast<std::size_t>(row) * w * 4;
        for (int x = 0; x < w; ++x) {
            float v;
            std::memcpy(&v, src + static_cast<std::size_t>(x) * 4, 4);
            out.at(x, y) = swap_if_big_endian(v, little);
        }
    }
    return out;
}

void write_pfm(const std::string& path, const ImageField& map) {
    if (map.channels != 1 || map.empty())
        throw std::invalid_argument("write_pfm: expected a non-empty 1-channel map");
    std::string out;
    char header[64];
    std::snprintf(header, sizeof(header), "Pf\n%d %d\n-1.0\n", map.width, map.height);
    out += header;
    for (int row = 0; row < map.height; ++row) {
        const int y = map.height - 1 - row;
        for (int x = 0; x < map.width; ++x) {
            const float v = static_cast<float>(map.at(x, y));
            char buf[4];
            std::memcpy(buf, &v, 4);
            out.append(buf, 4);
        }
    }
    write_atomic(path, out);
}

namespace {
constexpr float kFloMagic = 202021.25f;
}

ImageField read_flo(const std::string& path) {
    const std::string bytes = slurp(path);
    if (bytes.size() < 12) throw std::runtime_error(path + ": truncated .flo header");
    float magic;
    std::int32_t w, h;
    std::memcpy(&magic, bytes.data(), 4);
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    if (magic != kFloMagic)
        throw std::runtime_error(path + ": bad .flo magic (wrong endianness?)");
    if (w < 1 || h < 1 || w > 99999 || h > 99999)
        throw std::runtime_error(path + ": bad .flo dimensions");
    const std::size_t need = static_cast<std::size_t>(w) * h * 2 * 4;
    if (bytes.size() - 12 < need)
        throw std::runtime_error(path + ": truncated .flo payload");
    ImageField flow(w, h, 2);
    const char* src = bytes.data() + 12;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float u, v;
            const std::size_t off = (static_cast<std::size_t>(y) * w + x) * 8;
            std::memcpy(&u, src + off, 4);
            std::memcpy(&v, src + off + 4, 4);
            flow.at(x, y, 0) = u;
            flow.at(x, y, 1) = v;
        }
    }
    return flow;
}

void write_flo(const std::string& path, const ImageField& flow) {
    if (flow.channels != 2 || flow.empty())
        throw std::invalid_argument("write_flo: expected a non-empty 2-channel flow");
    std::string out;
    out.reserve(12 + flow.pixels() * 8);
    char buf[4];
    std::memcpy(buf, &kFloMagic, 4);
    out.append(buf, 4);
    const std::int32_t w = flow.width, h = flow.height;
    std::memcpy(buf, &w, 4);
    out.append(buf, 4);
    std::memcpy(buf, &h, 4);
    out.append(buf, 4);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float u = static_cast<float>(flow.at(x, y, 0));
            const float v = static_cast<float>(flow.at(x, y, 1));
            std::memcpy(buf, &u, 4);
            out.append(buf, 4);
            std::memcpy(buf, &v, 4);
            out.append(buf, 4);
        }
    }
    write_atomic(path, out);
}

// ---------------------------------------------------------------------------
// PNG plumbing (libpng row API; 16-bit values byteswapped to host order)

namespace {

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, &info);
        if (fp) std::fclose(fp);
    }
};

void open_png_reader(PngReader& r, const std::string& path) {
    r.fp = std::fopen(path.c_str(), "rb");
    if (!r.fp) throw std::runtime_error("cannot open " + path);
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (!r.png || !r.info) throw std::runtime_error(path + ": libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error(path + ": PNG read error");
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);
}

void read_png_rows(PngReader& r, std::vector<std::vector<png_byte>>& rows, int height,
                   std::size_t rowbytes) {
    rows.assign(height, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> ptrs(height);
    for (int y = 0; y < height; ++y) ptrs[y] = rows[y].data();
    png_read_image(r.png, ptrs.data());
}

void write_png16(const std::string& path, int width, int height, int color_type,
                 const std::vector<std::uint16_t>& interleaved) {
    const std::string tmp = path + ".tmp";
    PngWriter w;
    w.fp = std::fopen(tmp.c_str(), "wb");
    if (!w.fp) throw std::runtime_error("cannot write " + tmp);
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    w.info = png_create_info_struct(w.png);
    if (!w.png || !w.info) throw std::runtime_error(path + ": libpng init failed");
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error(path + ": PNG write error");
    png_init_io(w.png, w.fp);
    png_set_IHDR(w.png, w.info, width, height, 16, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_set_swap(w.png);  // host little-endian -> PNG network order
    const int samples = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    std::vector<png_bytep> ptrs(height);
    std::vector<std::uint16_t> buffer = interleaved;
    for (int y = 0; y < height; ++y)
        ptrs[y] = reinterpret_cast<png_bytep>(buffer.data() +
                                              static_cast<std::size_t>(y) * width * samples);
    png_write_image(w.png, ptrs.data());
    png_write_end(w.png, nullptr);
    std::fclose(w.fp);
    w.fp = nullptr;
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

std::vector<std::uint16_t> read_png16(const std::string& path, int expect_channels,
                                      int& width, int& height) {
    PngReader r;
    open_png_reader(r, path);
    if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error(path + ": PNG read error");
    width = static_cast<int>(png_get_image_width(r.png, r.info));
    height = static_cast<int>(png_get_image_height(r.png, r.info));
    const int depth = png_get_bit_depth(r.png, r.info);
    const int channels = png_get_channels(r.png, r.info);
    if (depth != 16)
        throw std::runtime_error(path + ": expected 16-bit PNG, got " +
                                 std::to_string(depth) + "-bit");
    if (channels != expect_channels)
        throw std::runtime_error(path + ": expected " + std::to_string(expect_channels) +
                                 " channels, got " + std::to_string(channels));
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);
    const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
    std::vector<std::vector<png_byte>> rows;
    read_png_rows(r, rows, height, rowbytes);
    std::vector<std::uint16_t> out(static_cast<std::size_t>(width) * height *
                                   expect_channels);
    for (int y = 0; y < height; ++y)
        std::memcpy(out.data() + static_cast<std::size_t>(y) * width * expect_channels,
                    rows[y].data(),
                    static_cast<std::size_t>(width) * expect_channels * 2);
    return out;
}

}  // namespace

std::pair<ImageField, ImageField> read_kitti_disp_png(const std::string& path) {
    int w, h;
    const std::vector<std::uint16_t> raw = read_png16(path, 1, w, h);
    ImageField disp(w, h, 1), valid(w, h, 1);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == 0) continue;
        disp.data[i] = raw[i] / 256.0;
        valid.data[i] = 1.0;
    }
    return {std::move(disp), std::move(valid)};
}

void write_kitti_disp_png(const std::string& path, const ImageField& disp,
                          const ImageField* valid) {
    if (disp.channels != 1 || disp.empty())
        throw std::invalid_argument("write_kitti_disp_png: expected a 1-channel map");
    std::vector<std::uint16_t> raw(disp.pixels());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (valid && valid->data[i] == 0.0) continue;  // 0 encodes invalid
        double v = std::lround(disp.data[i] * 256.0);
        if (v < 1.0) v = 1.0;
        if (v > 65535.0) v = 65535.0;
        raw[i] = static_cast<std::uint16_t>(v);
    }
    write_png16(path, disp.width, disp.height, PNG_COLOR_TYPE_GRAY, raw);
}

std::pair<ImageField, ImageField> read_kitti_flow_png(const std::string& path) {
    int w, h;
    const std::vector<std::uint16_t> raw = read_png16(path, 3, w, h);
    ImageField flow(w, h, 2), valid(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t off = (static_cast<std::size_t>(y) * w + x) * 3;
            if (raw[off + 2] == 0) continue;
            flow.at(x, y, 0) = (raw[off + 0] - 32768.0) / 64.0;
            flow.at(x, y, 1) = (raw[off + 1] - 32768.0) / 64.0;
            valid.at(x, y) = 1.0;
        }
    }
    return {std::move(flow), std::move(valid)};
}

void write_kitti_flow_png(const std::string& path, const ImageField& flow,
                          const ImageField* valid) {
    if (flow.channels != 2 || flow.empty())
        throw std::invalid_argument("write_kitti_flow_png: expected a 2-channel flow");
    const int w = flow.width, h = flow.height;
    std::vector<std::uint16_t> raw(static_cast<std::size_t>(w) * h * 3, 0);
    auto encode = [](double v) {
        double e = std::lround(v * 64.0 + 32768.0);
        if (e < 0.0) e = 0.0;
        if (e > 65535.0) e = 65535.0;
        return static_cast<std::uint16_t>(e);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t off = (static_cast<std::size_t>(y) * w + x) * 3;
            if (valid && valid->at(x, y) == 0.0) continue;
            raw[off + 0] = encode(flow.at(x, y, 0));
            raw[off + 1] = encode(flow.at(x, y, 1));
            raw[off + 2] = 1;
        }
    }
    write_png16(path, w, h, PNG_COLOR_TYPE_RGB, raw);
}

ImageField read_png8(const std::string& path) {
    PngReader r;
    open_png_reader(r, path);
    if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error(path + ": PNG read error");
    const int depth = png_get_bit_depth(r.png, r.info);
    if (depth > 8)
        throw std::runtime_error(path + ": expected an 8-bit image PNG");
    png_set_expand(r.png);  // palette -> rgb, low depths -> 8 bit
    if (png_get_color_type(r.png, r.info) & PNG_COLOR_MASK_ALPHA)
        png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);
    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    const int channels = png_get_channels(r.png, r.info);
    if (channels != 1 && channels != 3)
        throw std::runtime_error(path + ": unsupported channel count");
    const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
    std::vector<std::vector<png_byte>> rows;
    read_png_rows(r, rows, h, rowbytes);
    ImageField out(w, h, channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                out.at(x, y, c) = rows[y][static_cast<std::size_t>(x) * channels + c] / 255.0;
    return out;
}

}  // namespace sflow
