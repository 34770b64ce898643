#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "sflow/config.hpp"
#include "sflow/io.hpp"

using namespace sflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sflow_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

ImageField random_float_map(int w, int h, int channels, std::uint64_t seed) {
    ImageField f(w, h, channels);
    std::uint64_t rs = seed;
    for (double& v : f.data) {
        rs = rs * 6364136223846793005ULL + 1442695040888963407ULL;
        // float-representable payload so file round-trips are bit-exact
        v = static_cast<float>((double(rs >> 11) * 0x1.0p-53 - 0.5) * 64.0);
    }
    return f;
}

}  // namespace

TEST_CASE("pfm round-trip is bit-exact") {
    TempDir tmp;
    ImageField m = random_float_map(13, 7, 1, 5);
    write_pfm(tmp.file("m.pfm"), m);
    ImageField back = read_pfm(tmp.file("m.pfm"));
    REQUIRE(back.width == 13);
    REQUIRE(back.height == 7);
    CHECK(std::memcmp(back.data.data(), m.data.data(),
                      m.data.size() * sizeof(double)) == 0);
}

TEST_CASE("pfm payload is stored bottom-to-top, little-endian") {
    TempDir tmp;
    ImageField m(2, 2, 1);
    m.at(0, 0) = 1.0;  // top row
    m.at(1, 0) = 2.0;
    m.at(0, 1) = 3.0;  // bottom row
    m.at(1, 1) = 4.0;
    write_pfm(tmp.file("m.pfm"), m);
    std::ifstream f(tmp.file("m.pfm"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
    const std::string header = "Pf\n2 2\n-1.0\n";
    REQUIRE(bytes.compare(0, header.size(), header) == 0);
    float payload[4];
    std::memcpy(payload, bytes.data() + header.size(), 16);
    // bottom row (3,4) first, then the top row (1,2)
    CHECK(payload[0] == 3.0f);
    CHECK(payload[1] == 4.0f);
    CHECK(payload[2] == 1.0f);
    CHECK(payload[3] == 2.0f);
}

TEST_CASE("pfm reader rejects the 3-channel PF header") {
    TempDir tmp;
    std::ofstream f(tmp.file("c.pfm"), std::ios::binary);
    f << "PF\n2 2\n-1.0\n";
    for (int i = 0; i < 2 * 2 * 3 * 4; ++i) f.put('\0');
    f.close();
    CHECK_THROWS_WITH_AS((void)read_pfm(tmp.file("c.pfm")),
                         doctest::Contains("3-channel"), std::runtime_error);
}

TEST_CASE("pfm reader rejects truncated payloads") {
    TempDir tmp;
    std::ofstream f(tmp.file("t.pfm"), std::ios::binary);
    f << "Pf\n4 4\n-1.0\n";
    f.put('\0');
    f.close();
    CHECK_THROWS_AS((void)read_pfm(tmp.file("t.pfm")), std::runtime_error);
}

TEST_CASE("flo round-trip is bit-exact") {
    TempDir tmp;
    ImageField flow = random_float_map(9, 5, 2, 77);
    write_flo(tmp.file("f.flo"), flow);
    ImageField back = read_flo(tmp.file("f.flo"));
    REQUIRE(back.width == 9);
    REQUIRE(back.channels == 2);
    CHECK(std::memcmp(back.data.data(), flow.data.data(),
                      flow.data.size() * sizeof(double)) == 0);
}

TEST_CASE("flo reader rejects a bad magic, naming the file") {
    TempDir tmp;
    std::ofstream f(tmp.file("bad.flo"), std::ios::binary);
    const float magic = 123.0f;
    const std::int32_t wh[2] = {2, 2};
    f.write(reinterpret_cast<const char*>(&magic), 4);
    f.write(reinterpret_cast<const char*>(wh), 8);
    for (int i = 0; i < 2 * 2 * 2 * 4; ++i) f.put('\0');
    f.close();
    CHECK_THROWS_WITH_AS((void)read_flo(tmp.file("bad.flo")),
                         doctest::Contains("bad.flo"), std::runtime_error);
}

TEST_CASE("flo reader rejects zero dimensions") {
    TempDir tmp;
    std::ofstream f(tmp.file("z.flo"), std::ios::binary);
    const float magic = 202021.25f;
    const std::int32_t wh[2] = {0, 0};
    f.write(reinterpret_cast<const char*>(&magic), 4);
    f.write(reinterpret_cast<const char*>(wh), 8);
    f.close();
    CHECK_THROWS_AS((void)read_flo(tmp.file("z.flo")), std::runtime_error);
}

TEST_CASE("kitti disparity png scaling: 12800 -> 50.0, round-trip exact") {
    TempDir tmp;
    ImageField d(3, 2, 1);
    d.at(0, 0) = 50.0;  // stored as 12800
    d.at(1, 0) = 0.5;   // stored as 128
    d.at(2, 0) = 31.25;
    d.at(0, 1) = 1.0 / 256.0;  // smallest nonzero code
    d.at(1, 1) = 200.0;
    d.at(2, 1) = 77.00390625;
    write_kitti_disp_png(tmp.file("d.png"), d);
    auto [back, valid] = read_kitti_disp_png(tmp.file("d.png"));
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) {
            CHECK(back.at(x, y) == d.at(x, y));
            CHECK(valid.at(x, y) == 1.0);
        }
}

TEST_CASE("kitti disparity png: 0 decodes as invalid") {
    TempDir tmp;
    ImageField d(2, 1, 1);
    d.at(0, 0) = 4.0;
    d.at(1, 0) = 9.0;
    ImageField valid(2, 1, 1);
    valid.at(0, 0) = 1.0;  // second pixel invalid
    write_kitti_disp_png(tmp.file("d.png"), d, &valid);
    auto [back, vback] = read_kitti_disp_png(tmp.file("d.png"));
    CHECK(back.at(0, 0) == 4.0);
    CHECK(vback.at(0, 0) == 1.0);
    CHECK(back.at(1, 0) == 0.0);
    CHECK(vback.at(1, 0) == 0.0);
}

TEST_CASE("kitti flow png scaling: 2^15 -> 0.0, round-trip exact") {
    TempDir tmp;
    ImageField f(2, 2, 2);
    f.at(0, 0, 0) = 0.0;  // stored as 32768
    f.at(0, 0, 1) = -3.25;
    f.at(1, 0, 0) = 1.0 / 64.0;
    f.at(1, 0, 1) = 511.984375;
    f.at(0, 1, 0) = -100.5;
    f.at(0, 1, 1) = 0.015625;
    write_kitti_flow_png(tmp.file("f.png"), f);
    auto [back, valid] = read_kitti_flow_png(tmp.file("f.png"));
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            CHECK(back.at(x, y, 0) == f.at(x, y, 0));
            CHECK(back.at(x, y, 1) == f.at(x, y, 1));
            CHECK(valid.at(x, y) == 1.0);
        }
}

TEST_CASE("kitti readers reject an 8-bit png; read_png8 loads it into [0,1]") {
    TempDir tmp;
    // 2x2 8-bit grayscale fixture with pixels (10, 200, 255, 0)
    static const unsigned char png8[] = {
        0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d,
        0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02,
        0x08, 0x00, 0x00, 0x00, 0x00, 0x57, 0xdd, 0x52, 0xf8, 0x00, 0x00, 0x00,
        0x0e, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xe0, 0x3a, 0xc1, 0xf0,
        0x9f, 0x01, 0x00, 0x05, 0x56, 0x01, 0xd2, 0x73, 0xc3, 0x6d, 0x92, 0x00,
        0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
    std::ofstream f(tmp.file("a.png"), std::ios::binary);
    f.write(reinterpret_cast<const char*>(png8), sizeof(png8));
    f.close();
    CHECK_THROWS_WITH_AS((void)read_kitti_disp_png(tmp.file("a.png")),
                         doctest::Contains("16-bit"), std::runtime_error);
    ImageField img = read_png8(tmp.file("a.png"));
    REQUIRE(img.width == 2);
    REQUIRE(img.channels == 1);
    CHECK(img.at(0, 0) == doctest::Approx(10.0 / 255.0));
    CHECK(img.at(1, 0) == doctest::Approx(200.0 / 255.0));
    CHECK(img.at(0, 1) == doctest::Approx(1.0));
    CHECK(img.at(1, 1) == 0.0);
}

TEST_CASE("config: empty file yields full defaults") {
    RunConfig cfg = parse_config("", "<empty>");
    CHECK(cfg.omega_pd == 1.0);
    CHECK(cfg.omega_pf == 1.0);
    CHECK(cfg.omega_df == 1.0);
    CHECK(cfg.omega_s == 0.1);
    CHECK(cfg.occ_w1 == 0.01);
    CHECK(cfg.occ_w2 == 0.05);
    CHECK(cfg.refine_steps == 5);
    CHECK(cfg.adam_lr == 1e-4);
    CHECK(cfg.adam_beta1 == 0.9);
    CHECK(cfg.adam_beta2 == 0.999);
    CHECK(cfg.alpha_ssim == 0.85);
}

TEST_CASE("config: overrides touch only the named key") {
    RunConfig cfg = parse_config("omega_s = 0.2\n", "<t>");
    CHECK(cfg.omega_s == 0.2);
    CHECK(cfg.omega_pd == 1.0);
    CHECK(cfg.omega_pf == 1.0);
}

TEST_CASE("config: unknown keys are rejected with the line number") {
    CHECK_THROWS_WITH_AS((void)parse_config("omega_pd = 1\nomega_sx = 1\n", "<t>"),
                         doctest::Contains("<t>:2"), std::runtime_error);
    CHECK_THROWS_WITH_AS((void)parse_config("omega_sx = 1\n", "<t>"),
                         doctest::Contains("unknown key"), std::runtime_error);
}

TEST_CASE("config: malformed values are rejected with the line number") {
    CHECK_THROWS_WITH_AS((void)parse_config("\n\nomega_pd = abc\n", "<t>"),
                         doctest::Contains("<t>:3"), std::runtime_error);
    CHECK_THROWS_AS((void)parse_config("train_mode = nonsense\n", "<t>"),
                    std::runtime_error);
    CHECK_THROWS_AS((void)parse_config("just a line\n", "<t>"), std::runtime_error);
}

TEST_CASE("config: comments and blank lines are fine") {
    RunConfig cfg = parse_config("# comment\n\nrefine_steps = 7 # trailing\n", "<t>");
    CHECK(cfg.refine_steps == 7);
}
