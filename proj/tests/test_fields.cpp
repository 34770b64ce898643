#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "sflow/field.hpp"
#include "test_support.hpp"

using namespace sflow;

TEST_CASE("pack_state lays out [d1,d2,Fx,Fy,C] channel-planar") {
    SceneFlowState s = SceneFlowState::zeros(2, 2);
    for (auto& v : s.d1.data) v = 3.0;
    for (auto& v : s.d2.data) v = 3.0;
    ImageField f = pack_state(s);
    CHECK(f.channels == 5);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(f.plane(kChanD1)[i] == 3.0);
        CHECK(f.plane(kChanFx)[i] == 0.0);
        CHECK(f.plane(kChanFy)[i] == 0.0);
        CHECK(f.plane(kChanC)[i] == 0.0);
    }
}

TEST_CASE("pack_state is row-major within a plane") {
    SceneFlowState s = SceneFlowState::zeros(2, 2);
    s.d1.at(0, 0) = 1.0;
    s.d1.at(1, 0) = 2.0;
    s.d1.at(0, 1) = 3.0;
    s.d1.at(1, 1) = 4.0;
    ImageField f = pack_state(s);
    CHECK(f.plane(kChanD1)[0] == 1.0);
    CHECK(f.plane(kChanD1)[1] == 2.0);
    CHECK(f.plane(kChanD1)[2] == 3.0);
    CHECK(f.plane(kChanD1)[3] == 4.0);
}

TEST_CASE("pack/unpack round-trips valid states bit-exactly") {
    for (std::uint64_t seed : {1ull, 2ull, 9ull}) {
        testsupport::FdScene fd = testsupport::make_fd_scene(seed, 8, 6);
        const SceneFlowState& s = fd.state;
        SceneFlowState back = unpack_state(pack_state(s));
        CHECK(std::memcmp(back.d1.data.data(), s.d1.data.data(),
                          s.d1.data.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(back.d2.data.data(), s.d2.data.data(),
                          s.d2.data.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(back.flow.data.data(), s.flow.data.data(),
                          s.flow.data.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(back.dchange.data.data(), s.dchange.data.data(),
                          s.dchange.data.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("unpack_state clamps negative disparities") {
    ImageField f(2, 1, 5);
    f.plane(kChanD1)[0] = -0.5;
    f.plane(kChanD2)[1] = -2.0;
    f.plane(kChanC)[0] = -3.0;  // dchange is signed, stays
    SceneFlowState s = unpack_state(f);
    CHECK(s.d1.at(0, 0) == 0.0);
    CHECK(s.d2.at(1, 0) == 0.0);
    CHECK(s.dchange.at(0, 0) == -3.0);
}

TEST_CASE("unpack_state rejects wrong channel counts") {
    CHECK_THROWS_AS((void)unpack_state(ImageField(2, 2, 4)), std::invalid_argument);
    CHECK_THROWS_AS((void)unpack_state(ImageField(2, 2, 6)), std::invalid_argument);
}

TEST_CASE("gradient packing mirrors the state layout") {
    GradientField g = GradientField::zeros(3, 2);
    g.flow.at(1, 0, 1) = -7.0;
    g.dchange.at(2, 1) = 2.5;
    ImageField f = pack_gradient(g);
    CHECK(f.channels == 5);
    CHECK(f.at(1, 0, kChanFy) == -7.0);
    CHECK(f.at(2, 1, kChanC) == 2.5);
}
