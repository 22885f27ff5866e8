#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fwa/heatmap.hpp"

using namespace fwa;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("pgm writer emits a valid P2 header") {
    const fs::path dir = fs::temp_directory_path() / "fwa_pgm_test";
    fs::create_directories(dir);
    write_pgm((dir / "t.pgm").string(), {0, 128, 255, 64}, 2, 2);
    std::ifstream in(dir / "t.pgm");
    std::string magic;
    int w, h, maxv;
    in >> magic >> w >> h >> maxv;
    CHECK(magic == "P2");
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(maxv == 255);
    int px;
    for (int i = 0; i < 4; ++i) CHECK((in >> px).good());
}

TEST_CASE("heatmap demo writes 8 images with the expected zero structure") {
    const fs::path dir = fs::temp_directory_path() / "fwa_heatmap_test";
    fs::create_directories(dir);
    HeatmapOptions opt;
    opt.out_dir = dir.string();
    HeatmapResult res = run_heatmap_demo(opt);
    REQUIRE(res.files.size() == 9);  // 8 images + sidecar

    int drelu_images = 0, softmax_images = 0;
    for (std::size_t i = 0; i < res.files.size(); ++i) {
        const std::string& f = res.files[i];
        if (f.find(".pgm") == std::string::npos) continue;
        CHECK(fs::exists(dir / f));
        if (f.find("drelu") != std::string::npos) {
            ++drelu_images;
            CHECK(res.zero_counts[i] > 0);  // background suppressed to exact zero
        } else {
            ++softmax_images;
            CHECK(res.zero_counts[i] == 0);  // softmax weights strictly positive
        }
    }
    CHECK(drelu_images == 4);
    CHECK(softmax_images == 4);
    CHECK(fs::exists(dir / "heatmap_scales.json"));
}

TEST_CASE("noise-free drelu weights are constant inside the heart") {
    const fs::path dir = fs::temp_directory_path() / "fwa_heatmap_nonoise";
    fs::create_directories(dir);
    HeatmapOptions opt;
    opt.out_dir = dir.string();
    opt.noise = 0.0f;

    // compute directly: distinct positive weights per channel must be 1
    Tensor map = heart_feature_map(opt);
    TokenBatch batch = serialize(map, PatchGeometry{opt.side, opt.side, 1, 1, 1});
    const std::int64_t n = opt.side * opt.side, ch = opt.channels;
    const std::int64_t q = (opt.side / 2) * opt.side + opt.side / 2;
    for (std::int64_t c = 0; c < ch; ++c) {
        Tensor scores({1, n});
        for (std::int64_t i = 0; i < n; ++i)
            scores[i] = batch.tokens[q * ch + c] * batch.tokens[i * ch + c];
        Tensor w = drelu(scores, n, opt.dp, opt.eps);
        std::set<float> positive;
        for (std::int64_t i = 0; i < n; ++i)
            if (w[i] > 0.0f) positive.insert(w[i]);
        CHECK(positive.size() == 1);
    }

    HeatmapResult res = run_heatmap_demo(opt);
    CHECK(res.files.size() == 9);
}

TEST_CASE("heatmap demo is byte-identical across runs with the same seed") {
    const fs::path a = fs::temp_directory_path() / "fwa_heatmap_a";
    const fs::path b = fs::temp_directory_path() / "fwa_heatmap_b";
    fs::create_directories(a);
    fs::create_directories(b);
    HeatmapOptions oa, ob;
    oa.out_dir = a.string();
    ob.out_dir = b.string();
    HeatmapResult ra = run_heatmap_demo(oa);
    run_heatmap_demo(ob);
    for (const std::string& f : ra.files) CHECK(slurp(a / f) == slurp(b / f));
}
