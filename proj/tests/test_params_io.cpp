#include <doctest.h>

#include <filesystem>

#include "fedseg/rng.hpp"
#include "fedseg/weights_io.hpp"
#include "test_support.hpp"

using namespace fedseg;

TEST_SUITE_BEGIN("params_io");

namespace {
ModelParams sample_params(uint64_t seed) {
    Rng rng(seed);
    ModelParams p;
    p.add("enc0.conv1.weight", testutil::random_tensor({4, 1, 3, 3}, rng));
    p.add("enc0.conv1.bias", testutil::random_tensor({4}, rng));
    p.add("out.weight", testutil::random_tensor({1, 4, 1, 1}, rng));
    return p;
}
} // namespace

TEST_CASE("ivwt encode/decode round-trips bit-exactly") {
    ModelParams p = sample_params(1);
    std::vector<uint8_t> bytes = ivwt_encode(p);
    CHECK(bytes.size() > 16);
    CHECK(bytes[0] == 'I');
    CHECK(bytes[1] == 'V');
    CHECK(bytes[2] == 'W');
    CHECK(bytes[3] == 'T');
    ModelParams back = ivwt_decode(bytes);
    CHECK(back == p);
    // and the encoding itself is stable
    CHECK(ivwt_encode(back) == bytes);
}

TEST_CASE("ivwt detects corruption") {
    ModelParams p = sample_params(2);
    std::vector<uint8_t> bytes = ivwt_encode(p);

    std::vector<uint8_t> flipped = bytes;
    flipped[20] ^= 0x01;
    CHECK_THROWS_AS(ivwt_decode(flipped), std::runtime_error);

    std::vector<uint8_t> truncated(bytes.begin(), bytes.end() - 5);
    CHECK_THROWS_AS(ivwt_decode(truncated), std::runtime_error);

    std::vector<uint8_t> bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(ivwt_decode(bad_magic), std::runtime_error);
}

TEST_CASE("ivwt file save/load round trip") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "fedseg_w.ivwt").string();
    ModelParams p = sample_params(3);
    ivwt_save(p, path);
    ModelParams back = ivwt_load(path);
    CHECK(back == p);
    fs::remove(path);
}

TEST_CASE("params reject duplicate names and bad flats") {
    ModelParams p;
    p.add("a", Tensor({2}));
    CHECK_THROWS_AS(p.add("a", Tensor({2})), std::invalid_argument);
    CHECK_THROWS_AS(p.unflatten(std::vector<float>{1.0f}), std::invalid_argument);
}

TEST_SUITE_END();
