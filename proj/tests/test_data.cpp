#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "seds/dataset.hpp"
#include "seds/pose.hpp"
#include "seds/synth.hpp"
#include "seds/tensor_io.hpp"

using namespace seds;

namespace {

SyntheticSpec tiny_spec() {
    SyntheticSpec s;
    s.vocab_glosses = 6;
    s.min_glosses = 2;
    s.max_glosses = 3;
    s.pose_noise = 0.01;
    s.rgb_noise = 0.05;
    s.nuisance_strength = 0.1;
    s.signer_offset = 0.02;
    s.signer_scale = 0.05;
    s.low_conf_prob = 0.1;
    s.permute_prob = 0.2;
    s.filler_prob = 0.2;
    s.n_train = 6;
    s.n_val = 2;
    s.n_test = 2;
    s.seed = 99;
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag)
        : path(std::filesystem::temp_directory_path() / ("seds_test_" + tag)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("SEDT round-trip preserves shape and values across dtypes") {
    TempDir td("sedt");
    auto t = Tensor<double>::from({2, 3, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    save_sedt((td.path / "a.sedt").string(), t);
    auto back = load_sedt<double>((td.path / "a.sedt").string());
    REQUIRE(back.shape() == t.shape());
    CHECK(back.data() == t.data());
    // f64 file read as f32 converts
    auto f32 = load_sedt<float>((td.path / "a.sedt").string());
    CHECK(f32.data()[11] == 12.0f);
    CHECK_THROWS_AS(load_sedt<double>((td.path / "missing.sedt").string()), IoError);
}

TEST_CASE("archive round-trip") {
    TempDir td("seda");
    std::vector<std::pair<std::string, Tensor<double>>> entries{
        {"w", Tensor<double>::from({2, 2}, {1, 2, 3, 4})},
        {"b", Tensor<double>::from({2}, {5, 6})}};
    save_archive((td.path / "m.seda").string(), entries);
    auto back = load_archive<double>((td.path / "m.seda").string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "w");
    CHECK(back[1].second.data() == std::vector<double>{5, 6});
}

TEST_CASE("frame filtering drops low-confidence hands and keeps indices") {
    PoseSequence p;
    p.frames = 20;
    p.keypoints.assign(p.frames * kTotalPoints * 3, 0.5);
    for (std::size_t k = 0; k < kHandPoints; ++k) p.at(3, kLeftHandOffset + k, 2) = 0.05;
    auto fr = filter_frames(p, 0.3);
    CHECK(fr.sequence.frames == 19);
    CHECK(fr.retained[3] == 4);  // frame 3 was dropped
    // dropping too many frames is an error
    PoseSequence bad = p;
    for (std::size_t f = 0; f < 10; ++f)
        for (std::size_t k = 0; k < kHandPoints; ++k) bad.at(f, kRightHandOffset + k, 2) = 0.0;
    CHECK_THROWS_AS(filter_frames(bad, 0.3), DataError);
}

TEST_CASE("clip planning covers the candidate range at equal intervals") {
    auto plan = plan_clips(31, 4);  // C = 16 candidates
    REQUIRE(plan.starts.size() == 4);
    CHECK(plan.starts.front() == 0);
    CHECK(plan.starts.back() == 15);
    CHECK(plan.valid == std::vector<std::uint8_t>{1, 1, 1, 1});

    auto single = plan_clips(25, 1);
    CHECK(single.starts == std::vector<std::size_t>{4});  // middle of 10 candidates

    auto padded = plan_clips(17, 4);  // only 2 candidates
    CHECK(padded.starts == std::vector<std::size_t>{0, 1, 1, 1});
    CHECK(padded.valid == std::vector<std::uint8_t>{1, 1, 0, 0});

    CHECK_THROWS_AS(plan_clips(15, 4), DataError);
}

TEST_CASE("synthesis is deterministic in the spec seed") {
    TempDir a("synth_a"), b("synth_b");
    SyntheticSpec spec = tiny_spec();
    synth_dataset(spec, a.path.string());
    synth_dataset(spec, b.path.string());
    CHECK(read_file((a.path / "manifest.json").string()) ==
          read_file((b.path / "manifest.json").string()));
    CHECK(read_file((a.path / "samples/train_0_pose.sedt").string()) ==
          read_file((b.path / "samples/train_0_pose.sedt").string()));
    CHECK(read_file((a.path / "samples/test_1_rgb.sedt").string()) ==
          read_file((b.path / "samples/test_1_rgb.sedt").string()));
    // a different seed changes the data
    spec.seed = 100;
    TempDir c("synth_c");
    synth_dataset(spec, c.path.string());
    CHECK(read_file((a.path / "samples/train_0_pose.sedt").string()) !=
          read_file((c.path / "samples/train_0_pose.sedt").string()));
}

TEST_CASE("manifest loading and batch assembly") {
    TempDir td("batch");
    synth_dataset(tiny_spec(), td.path.string());
    Dataset ds = load_manifest(td.path.string());
    CHECK(ds.samples.size() == 10);
    CHECK(ds.split_indices("train").size() == 6);
    CHECK(ds.split_indices("val").size() == 2);
    CHECK(ds.vocab.front() == "<pad>");

    auto idx = ds.split_indices("train");
    Batch<double> batch = load_batch<double>(ds, {idx[0], idx[1]}, 8, 6, 0.3);
    REQUIRE(batch.samples.size() == 2);
    const auto& s = batch.samples[0];
    CHECK(s.rgb_clips.shape() == Shape{8, kRgbDim});
    CHECK(s.clip_mask.size() == 8);
    CHECK(!s.tokens.empty());
    CHECK(s.tokens.size() <= 6);
    for (auto t : s.tokens) CHECK(t < ds.vocab.size());

    CHECK_THROWS_AS(tokenize(ds, {"nonsense"}, 4), DataError);
    CHECK_THROWS_AS(tokenize(ds, {}, 4), DataError);
    CHECK_THROWS_AS(load_batch<double>(ds, {}, 8, 6, 0.3), DataError);
}

TEST_CASE("text perturbations keep gloss tokens from the vocabulary") {
    TempDir td("text");
    SyntheticSpec spec = tiny_spec();
    spec.permute_prob = 1.0;
    spec.filler_prob = 0.8;
    synth_dataset(spec, td.path.string());
    Dataset ds = load_manifest(td.path.string());
    for (const auto& rec : ds.samples) {
        CHECK(rec.text.size() >= rec.gloss_ids.size());
        for (const auto& w : rec.text) CHECK(ds.token_ids.count(w) == 1);
    }
}
