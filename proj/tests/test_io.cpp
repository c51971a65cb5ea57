#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "deltaflux/io.hpp"
#include "support/testutil.hpp"

using namespace dflx;
using testutil::TestRng;

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "dflx_iotest") { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("tensor file: exact header bytes and roundtrip") {
    TempDir tmp;
    TestRng rng(1);
    const Tensor t = testutil::random_tensor(2, 3, 5, rng);
    const std::string path = tmp.file("t.dflx");
    save_tensor(t, path);

    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    REQUIRE(raw.size() == 20 + t.size() * 4);
    CHECK(raw[0] == 'D');
    CHECK(raw[1] == 'F');
    CHECK(raw[2] == 'L');
    CHECK(raw[3] == 'X');
    CHECK(raw[4] == 1);   // version, little endian
    CHECK(raw[8] == 2);   // channels
    CHECK(raw[12] == 3);  // height
    CHECK(raw[16] == 5);  // width

    const Tensor back = load_tensor(path);
    CHECK(back.channels == 2);
    CHECK(back.height == 3);
    CHECK(back.width == 5);
    CHECK(back.data == t.data);
}

TEST_CASE("tensor file: corrupt inputs rejected with IoError") {
    TempDir tmp;
    const std::string path = tmp.file("bad.dflx");
    std::ofstream(path, std::ios::binary) << "NOPE";
    CHECK_THROWS_AS(load_tensor(path), IoError);
    CHECK_THROWS_AS(load_tensor(tmp.file("missing.dflx")), IoError);

    // Truncated payload.
    TestRng rng(2);
    const Tensor t = testutil::random_tensor(1, 4, 4, rng);
    const std::string path2 = tmp.file("trunc.dflx");
    save_tensor(t, path2);
    fs::resize_file(path2, 30);
    CHECK_THROWS_AS(load_tensor(path2), IoError);
}

TEST_CASE("ppm roundtrip within quantization error") {
    TempDir tmp;
    TestRng rng(3);
    const Tensor t = testutil::random_tensor(3, 9, 7, rng, 0.0f, 1.0f);
    save_ppm(t, tmp.file("f.ppm"));
    const Tensor back = load_ppm(tmp.file("f.ppm"));
    CHECK(back.channels == 3);
    CHECK(back.height == 9);
    CHECK(max_abs_diff(t, back) <= 0.5f / 255.0f + 1e-6f);

    // load_frame dispatches on extension.
    const Tensor again = load_frame(tmp.file("f.ppm"));
    CHECK(again.data == back.data);
}

TEST_CASE("pgm roundtrip for single-channel masks") {
    TempDir tmp;
    Tensor m(1, 6, 6);
    m.at(0, 2, 3) = 1.0f;
    save_pgm(m, tmp.file("m.pgm"));
    const Tensor back = load_pgm(tmp.file("m.pgm"));
    CHECK(back.at(0, 2, 3) == doctest::Approx(1.0f));
    CHECK(back.at(0, 0, 0) == doctest::Approx(0.0f));
}

TEST_CASE("homography file roundtrip; identity first line convention") {
    TempDir tmp;
    std::vector<Homography> hs = {Homography::identity(), Homography::translation(32, -16)};
    save_homographies(hs, tmp.file("h.txt"));
    const auto back = load_homographies(tmp.file("h.txt"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].m == hs[0].m);
    CHECK(back[1].m == hs[1].m);

    std::ofstream(tmp.file("short.txt")) << "1 0 0 0 1\n";
    CHECK_THROWS_AS(load_homographies(tmp.file("short.txt")), IoError);
}

TEST_CASE("buffer dump writes the storage tensor and a tile sidecar") {
    TempDir tmp;
    SphericalBuffer buf({4, 4, 2, 3}, 1);
    buf.at_global(0, 0, 0) = 5.0f;
    TileLedger ledger(2, 3);
    FramePlan plan = plan_frame(ledger, {{1, 0}, 1, 1}, 0);
    apply_plan(plan, ledger, {});

    const std::string path = tmp.file("buf.dflx");
    dump_buffer(buf, &ledger, path);
    const Tensor t = load_tensor(path);
    CHECK(t.height == 8);
    CHECK(t.width == 12);
    CHECK(t.at(0, 0, 0) == 5.0f);

    std::ifstream side(path + ".tiles.txt");
    REQUIRE(side.good());
    std::string header, line1;
    std::getline(side, header);
    std::getline(side, line1);
    CHECK(line1 == "0 0 - - 0");
    std::getline(side, line1);
    CHECK(line1 == "0 1 0 1 1");  // slot (0,1) holds coord ty=0 tx=1, covered
}

TEST_SUITE_END();
