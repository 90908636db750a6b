#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "certwatch/datagen.hpp"

using namespace certwatch;
namespace fs = std::filesystem;

namespace {

SceneSpec small_spec(std::uint64_t seed) {
    SceneSpec s;
    s.width = 64;
    s.height = 36;
    s.rng_seed = seed;
    s.n_entities = 3;
    return s;
}

int count_mask(const Tensor& mask) {
    int n = 0;
    for (float v : mask.data)
        if (v > 0.0f) ++n;
    return n;
}

int count_diff(const Tensor& a, const Tensor& b) {
    int n = 0;
    const int H = a.shape[1], W = a.shape[2];
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                if (a.at(c, y, x) != b.at(c, y, x)) {
                    ++n;
                    break;
                }
    return n;
}

std::string fresh_dir(const char* stem) {
    std::string d = std::string("/tmp/certwatch_data_") + stem;
    fs::remove_all(d);
    return d;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("scene rendering") {
    SECTION("deterministic per seed") {
        Scene a = render_scene(small_spec(7));
        Scene b = render_scene(small_spec(7));
        CHECK(a.image.data == b.image.data);
        REQUIRE(a.entities.size() == b.entities.size());
        Scene c = render_scene(small_spec(8));
        CHECK(a.image.data != c.image.data);
    }
    SECTION("pixels stay in range and at least one entity hides") {
        Scene s = render_scene(small_spec(3));
        for (float v : s.image.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
        int occluded = 0;
        for (auto& e : s.entities)
            if (e.occluded) ++occluded;
        CHECK(occluded >= 1);
    }
    SECTION("empty scenes produce empty overlays") {
        SceneSpec spec = small_spec(5);
        spec.n_entities = 0;
        Scene s = render_scene(spec);
        CHECK(s.entities.empty());
        auto ov = apply_overlay(s.image, s.entities, OverlayLevel::Minimal, Style::A);
        CHECK(count_mask(ov.mask) == 0);
        CHECK(ov.image.data == s.image.data);
    }
    SECTION("style is a visible knob") {
        SceneSpec a = small_spec(11);
        SceneSpec b = small_spec(11);
        b.style = Style::B;
        CHECK(count_diff(render_scene(a).image, render_scene(b).image) > 0);
    }
    SECTION("degenerate dims are rejected") {
        SceneSpec s = small_spec(1);
        s.height = 20;
        CHECK_THROWS(render_scene(s));
    }
}

TEST_CASE("overlay footprints are ordered over a 20-scene suite") {
    for (Style style : {Style::A, Style::B}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Scene s = render_scene(small_spec(100 + seed));
            int minimal = count_mask(
                apply_overlay(s.image, s.entities, OverlayLevel::Minimal, style).mask);
            int medium = count_mask(
                apply_overlay(s.image, s.entities, OverlayLevel::Medium, style).mask);
            int full = count_mask(
                apply_overlay(s.image, s.entities, OverlayLevel::Full, style).mask);
            CHECK(minimal > 0);
            CHECK(minimal < medium);
            CHECK(medium < full);
        }
    }
}

TEST_CASE("cheat twins differ only inside the declared mask") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Scene s = render_scene(small_spec(200 + seed));
        for (OverlayLevel level :
             {OverlayLevel::Minimal, OverlayLevel::Medium, OverlayLevel::Full}) {
            auto ov = apply_overlay(s.image, s.entities, level, Style::A);
            const int H = s.image.shape[1], W = s.image.shape[2];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    bool differs = false;
                    for (int c = 0; c < 3; ++c)
                        if (ov.image.at(c, y, x) != s.image.at(c, y, x)) differs = true;
                    if (differs) CHECK(ov.mask.at(y, x) == 1.0f);
                }
        }
    }
}

TEST_CASE("ppm and pgm round trips") {
    Scene s = render_scene(small_spec(42));
    std::string dir = fresh_dir("imgio");
    fs::create_directories(dir);

    SECTION("ppm preserves quantized pixels") {
        write_ppm(dir + "/a.ppm", s.image);
        Tensor back = read_ppm(dir + "/a.ppm");
        REQUIRE(back.shape == s.image.shape);
        for (int i = 0; i < back.numel(); ++i) {
            float q = std::lround(std::min(1.0f, std::max(0.0f, s.image[i])) * 255.0f) / 255.0f;
            CHECK_THAT(back[i], Catch::Matchers::WithinAbs(q, 1e-6));
        }
    }
    SECTION("pgm stores a binary mask") {
        auto ov = apply_overlay(s.image, s.entities, OverlayLevel::Medium, Style::A);
        write_pgm(dir + "/m.pgm", ov.mask);
        Tensor back = read_pgm(dir + "/m.pgm");
        CHECK(back.data == ov.mask.data);
    }
    SECTION("bad files produce clear errors") {
        CHECK_THROWS_WITH(read_ppm(dir + "/nope.ppm"),
                          Catch::Matchers::ContainsSubstring("cannot open"));
        std::ofstream bad(dir + "/bad.ppm", std::ios::binary);
        bad << "P6\n4 4\n255\nxx";
        bad.close();
        CHECK_THROWS_WITH(read_ppm(dir + "/bad.ppm"),
                          Catch::Matchers::ContainsSubstring("truncated"));
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset build and load") {
    DatasetConfig cfg;
    cfg.width = 64;
    cfg.height = 36;
    cfg.train_count = 9; // odd: one unpaired clean record
    cfg.val_count = 4;
    cfg.test_count = 6;
    cfg.seed = 77;
    cfg.n_entities = 3;

    std::string dir = fresh_dir("build");
    DatasetManifest m = build_dataset(cfg, dir);

    SECTION("counts, balance and level spread") {
        std::map<std::string, std::pair<int, int>> by_split; // clean, cheat
        std::map<std::string, int> levels;
        for (auto& r : m.records) {
            if (r.label == 0)
                ++by_split[r.split].first;
            else {
                ++by_split[r.split].second;
                ++levels[r.overlay_level];
            }
        }
        CHECK(by_split["train"] == std::pair{5, 4});
        CHECK(by_split["val"] == std::pair{2, 2});
        CHECK(by_split["test"] == std::pair{3, 3});
        // 4+2+3 = 9 cheat frames over three levels
        CHECK(levels["minimal"] == 3);
        CHECK(levels["medium"] == 3);
        CHECK(levels["full"] == 3);
    }
    SECTION("every cheat record has a clean twin and scenes stay in one split") {
        std::map<std::uint64_t, std::string> scene_split;
        std::set<std::uint64_t> clean_pairs;
        for (auto& r : m.records) {
            auto [it, fresh] = scene_split.emplace(r.scene_id, r.split);
            if (!fresh) CHECK(it->second == r.split);
            if (r.label == 0) clean_pairs.insert(r.pair_id);
        }
        for (auto& r : m.records)
            if (r.label == 1) CHECK(clean_pairs.count(r.pair_id) == 1);
    }
    SECTION("rebuilds are byte-identical") {
        std::string dir2 = fresh_dir("build2");
        build_dataset(cfg, dir2);
        CHECK(slurp(dir + "/manifest.json") == slurp(dir2 + "/manifest.json"));
        for (auto& r : m.records)
            CHECK(slurp(dir + "/" + r.image_path) == slurp(dir2 + "/" + r.image_path));
        fs::remove_all(dir2);
    }
    SECTION("round trip keeps labels, pairs and pixel range") {
        auto frames = load_dataset(dir + "/manifest.json");
        REQUIRE(frames.size() == m.records.size());
        for (std::size_t i = 0; i < frames.size(); ++i) {
            CHECK(frames[i].label == m.records[i].label);
            CHECK(frames[i].meta.pair_id == m.records[i].pair_id);
            for (float v : frames[i].image.data) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
        auto train_only = load_dataset(dir + "/manifest.json", "train");
        CHECK(train_only.size() == 9);
    }
    SECTION("twin images differ only inside the stored mask") {
        std::map<std::uint64_t, const FrameRecord*> clean_by_pair;
        for (auto& r : m.records)
            if (r.label == 0) clean_by_pair[r.pair_id] = &r;
        int checked = 0;
        for (auto& r : m.records) {
            if (r.label != 1) continue;
            Tensor cheat = read_ppm(dir + "/" + r.image_path);
            Tensor clean = read_ppm(dir + "/" + clean_by_pair.at(r.pair_id)->image_path);
            Tensor mask = read_pgm(dir + "/" + r.mask_path);
            const int H = cheat.shape[1], W = cheat.shape[2];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    if (mask.at(y, x) == 0.0f)
                        for (int c = 0; c < 3; ++c)
                            if (cheat.at(c, y, x) != clean.at(c, y, x)) {
                                CHECK(false);
                                c = 3;
                            }
            ++checked;
        }
        CHECK(checked == 9);
    }
    SECTION("loader errors are distinct") {
        CHECK_THROWS_WITH(load_dataset(dir + "/absent.json"),
                          Catch::Matchers::ContainsSubstring("manifest missing"));

        std::string broken = fresh_dir("broken");
        fs::create_directories(broken);
        std::ofstream(broken + "/manifest.json") << "{ not json";
        CHECK_THROWS_WITH(load_dataset(broken + "/manifest.json"),
                          Catch::Matchers::ContainsSubstring("malformed manifest"));
        fs::remove_all(broken);

        std::string gone;
        for (auto& r : m.records)
            if (r.label == 0) gone = r.image_path;
        fs::copy_file(dir + "/" + gone, dir + "/" + gone + ".bak");
        fs::remove(dir + "/" + gone);
        CHECK_THROWS_WITH(load_dataset(dir + "/manifest.json"),
                          Catch::Matchers::ContainsSubstring(gone));
        fs::copy_file(dir + "/" + gone + ".bak", dir + "/" + gone);

        // tamper with one byte of pixel data
        {
            std::fstream f(dir + "/" + gone,
                           std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(-1, std::ios::end);
            char c;
            f.seekg(-1, std::ios::end);
            f.get(c);
            f.seekp(-1, std::ios::end);
            f.put(static_cast<char>(c ^ 0x7f));
        }
        CHECK_THROWS_WITH(load_dataset(dir + "/manifest.json"),
                          Catch::Matchers::ContainsSubstring("checksum mismatch"));
    }
    fs::remove_all(dir);
}

TEST_CASE("bad build configs are rejected") {
    DatasetConfig cfg;
    cfg.train_count = 0;
    cfg.val_count = 0;
    cfg.test_count = 0;
    CHECK_THROWS(build_dataset(cfg, "/tmp/certwatch_never"));
    cfg.train_count = 4;
    cfg.n_entities = 0;
    CHECK_THROWS(build_dataset(cfg, "/tmp/certwatch_never"));
    cfg.n_entities = 2;
    cfg.levels.clear();
    CHECK_THROWS(build_dataset(cfg, "/tmp/certwatch_never"));
}

TEST_CASE("folder-of-images layout") {
    std::string dir = fresh_dir("folder");
    fs::create_directories(dir + "/clean");
    fs::create_directories(dir + "/cheat");
    Scene s = render_scene(small_spec(9));
    write_ppm(dir + "/clean/a.ppm", s.image);
    auto ov = apply_overlay(s.image, s.entities, OverlayLevel::Full, Style::A);
    write_ppm(dir + "/cheat/b.ppm", ov.image);
    write_ppm(dir + "/cheat/c.ppm", ov.image);

    auto frames = load_image_folder(dir);
    REQUIRE(frames.size() == 3);
    CHECK(frames[0].label == 0);
    CHECK(frames[1].label == 1);
    CHECK(frames[2].label == 1);
    CHECK_THROWS(load_image_folder(dir + "/empty"));
    fs::remove_all(dir);
}
