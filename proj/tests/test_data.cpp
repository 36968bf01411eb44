#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include <png.h>

#include "doctest.h"
#include "gard/corpus.hpp"
#include "gard/image_io.hpp"
#include "gard/metrics.hpp"
#include "gard/phantom.hpp"
#include "gard/sampler.hpp"
#include "gard/types.hpp"
#include "test_util.hpp"

using testutil::moments;
using testutil::scratch_dir;

// Number of layer transitions in one column: count value changes walking down.
static int column_transitions(const gard::ImageField& img, int c) {
    int n = 0;
    for (int r = 1; r < img.height; ++r)
        if (img.at(r, c) != img.at(r - 1, c)) ++n;
    return n;
}

// Writes a PNG with arbitrary color type / bit depth, for negative I/O tests.
static void write_png_raw(const std::string& path, int w, int h, int color_type, int bit_depth) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;
    const int bytes = (bit_depth == 16) ? 2 : 1;
    std::vector<png_byte> row(static_cast<size_t>(w) * channels * bytes, 128);
    for (int r = 0; r < h; ++r) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

TEST_SUITE("data") {

TEST_CASE("phantom is deterministic per seed") {
    gard::PhantomParams p;
    p.seed = 42;
    const auto a = gard::generate_phantom(p);
    const auto b = gard::generate_phantom(p);
    CHECK(a.values == b.values);
    p.seed = 43;
    const auto c = gard::generate_phantom(p);
    CHECK(a.values != c.values);
}

TEST_CASE("phantom values lie in (0,1] linear intensity") {
    for (std::uint64_t seed : {0, 1, 2, 3, 4}) {
        gard::PhantomParams p;
        p.seed = seed;
        const auto img = gard::generate_phantom(p);
        CHECK(img.domain == gard::Domain::LinearIntensity);
        const auto m = moments(img.values);
        CHECK(m.min > 0.0);
        CHECK(m.max <= 1.0);
    }
}

TEST_CASE("unblurred phantom has exactly n_layers-1 boundaries per column") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        gard::PhantomParams p;
        p.blur_sigma = 0.0;
        p.n_vessels = 0;
        p.seed = seed;
        const auto img = gard::generate_phantom(p);
        for (int c = 0; c < img.width; ++c) {
            CAPTURE(seed);
            CAPTURE(c);
            CHECK(column_transitions(img, c) == p.n_layers - 1);
        }
    }
}

TEST_CASE("zero waviness gives identical columns") {
    gard::PhantomParams p;
    p.boundary_waviness = 0.0;
    p.n_vessels = 0;
    p.blur_sigma = 0.0;
    p.seed = 9;
    const auto img = gard::generate_phantom(p);
    for (int c = 1; c < img.width; ++c)
        for (int r = 0; r < img.height; ++r) CHECK(img.at(r, c) == img.at(r, 0));
}

TEST_CASE("layer count responds to n_layers") {
    for (int n_layers : {5, 7, 9}) {
        gard::PhantomParams p;
        p.n_layers = n_layers;
        p.n_vessels = 0;
        p.blur_sigma = 0.0;
        p.seed = 17;
        const auto img = gard::generate_phantom(p);
        CHECK(column_transitions(img, img.width / 2) == n_layers - 1);
    }
}

TEST_CASE("phantom parameter validation") {
    gard::PhantomParams p;
    p.width = 16;  // too small
    CHECK_THROWS_AS(gard::generate_phantom(p), gard::config_error);
    p = {};
    p.n_layers = 4;
    CHECK_THROWS_AS(gard::generate_phantom(p), gard::config_error);
    p = {};
    p.n_layers = 10;
    CHECK_THROWS_AS(gard::generate_phantom(p), gard::config_error);
    p = {};
    p.reflectivity_range = {0.9, 0.2};
    CHECK_THROWS_AS(gard::generate_phantom(p), gard::config_error);
    p = {};
    p.boundary_waviness = -1.0;
    CHECK_THROWS_AS(gard::generate_phantom(p), gard::config_error);
    p = {};
    p.n_vessels = -1;
    CHECK_THROWS_AS(gard::generate_phantom(p), gard::config_error);
}

TEST_CASE("display transforms map (0,1] onto [0,255] monotonically") {
    gard::ImageField ramp(1, 100, gard::Domain::LinearIntensity);
    for (int i = 0; i < 100; ++i) ramp.values[i] = (i + 1) / 100.0;
    for (const auto tf : {gard::DisplayTransform::FourthRoot, gard::DisplayTransform::Log}) {
        const auto disp = gard::to_display(ramp, tf);
        CHECK(disp.domain == gard::Domain::Raw8bit);
        for (int i = 1; i < 100; ++i) CHECK(disp.values[i] >= disp.values[i - 1]);
        CHECK(disp.values[99] == doctest::Approx(255.0).epsilon(1e-9));
        CHECK(disp.values[0] >= 0.0);
    }
    // fourth root brightens low intensities more than log at the dark end
    const auto fr = gard::to_display(ramp, gard::DisplayTransform::FourthRoot);
    CHECK(fr.values[0] == doctest::Approx(255.0 * std::pow(0.01, 0.25)).epsilon(1e-9));
}

TEST_CASE("speckle gamma moments: L=4 draws have mean 1 and variance 1/4") {
    const auto draws = gard::sample_gamma(4.0, 0.25, 1000000, 2024);
    const auto m = moments(draws);
    CHECK(std::abs(m.mean - 1.0) < 0.005);
    CHECK(std::abs(m.var - 0.25) < 0.005);
}

TEST_CASE("speckled pair: averaging always improves mse against clean") {
    gard::PhantomParams pp;
    pp.seed = 5;
    const auto phantom = gard::generate_phantom(pp);
    gard::SpeckleParams sp;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pair = gard::apply_speckle(phantom, sp, seed);
        CHECK(pair.clean.domain == gard::Domain::Raw8bit);
        CHECK(pair.noisy.same_shape(pair.clean));
        CHECK(pair.less_noisy.same_shape(pair.clean));
        const double mse_noisy = gard::mse(pair.noisy, pair.clean);
        const double mse_avg = gard::mse(pair.less_noisy, pair.clean);
        CAPTURE(seed);
        CHECK(mse_avg < mse_noisy);
    }
}

TEST_CASE("speckle is multiplicative: dark regions carry less absolute noise") {
    gard::ImageField two_tone(64, 64, gard::Domain::LinearIntensity, 0.05);
    for (int r = 0; r < 64; ++r)
        for (int c = 32; c < 64; ++c) two_tone.at(r, c) = 0.9;
    gard::SpeckleParams sp;
    sp.display_transform = gard::DisplayTransform::FourthRoot;
    const auto pair = gard::apply_speckle(two_tone, sp, 3);
    // compare per-half variance of noisy-minus-clean in the linear domain proxy
    double var_dark = 0.0, var_bright = 0.0;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) {
            const double d = pair.noisy.at(r, c) - pair.clean.at(r, c);
            (c < 32 ? var_dark : var_bright) += d * d;
        }
    CHECK(var_dark < var_bright);  // display compresses but ordering survives
}

TEST_CASE("speckle determinism and seed sensitivity") {
    gard::PhantomParams pp;
    pp.seed = 6;
    const auto phantom = gard::generate_phantom(pp);
    gard::SpeckleParams sp;
    const auto a = gard::apply_speckle(phantom, sp, 11);
    const auto b = gard::apply_speckle(phantom, sp, 11);
    const auto c = gard::apply_speckle(phantom, sp, 12);
    CHECK(a.noisy.values == b.noisy.values);
    CHECK(a.less_noisy.values == b.less_noisy.values);
    CHECK(a.noisy.values != c.noisy.values);
    CHECK(a.clean.values == c.clean.values);  // clean does not depend on the noise seed
}

TEST_CASE("speckle parameter validation") {
    gard::SpeckleParams sp;
    sp.looks = 0.0;
    CHECK_THROWS_AS(sp.validate(), gard::config_error);
    sp = {};
    sp.averaging_count = 0;
    CHECK_THROWS_AS(sp.validate(), gard::config_error);
}

TEST_CASE("normalize worked values and round trip") {
    gard::ImageField raw(1, 5, gard::Domain::Raw8bit);
    raw.values = {0.0, 63.75, 127.5, 191.25, 255.0};
    const auto norm = gard::normalize(raw, gard::Domain::Raw8bit, gard::Domain::Normalized);
    CHECK(norm.domain == gard::Domain::Normalized);
    CHECK(norm.values[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(norm.values[2] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(norm.values[4] == doctest::Approx(1.0).epsilon(1e-14));
    const auto back = gard::normalize(norm, gard::Domain::Normalized, gard::Domain::Raw8bit);
    for (int i = 0; i < 5; ++i)
        CHECK(back.values[i] == doctest::Approx(raw.values[i]).epsilon(1e-12));
}

TEST_CASE("normalize clips out-of-range values") {
    gard::ImageField over(1, 2, gard::Domain::Normalized);
    over.values = {1.2, -3.0};
    const auto raw = gard::normalize(over, gard::Domain::Normalized, gard::Domain::Raw8bit);
    CHECK(raw.values[0] == 255.0);
    CHECK(raw.values[1] == 0.0);
    gard::ImageField hot(1, 1, gard::Domain::Raw8bit, 300.0);
    const auto norm = gard::normalize(hot, gard::Domain::Raw8bit, gard::Domain::Normalized);
    CHECK(norm.values[0] == 1.0);
}

TEST_CASE("normalize rejects unsupported domain pairs") {
    const gard::ImageField lin(1, 1, gard::Domain::LinearIntensity, 0.5);
    CHECK_THROWS_AS(gard::normalize(lin, gard::Domain::LinearIntensity, gard::Domain::Normalized),
                    gard::config_error);
    const gard::ImageField raw(1, 1, gard::Domain::Raw8bit, 4.0);
    CHECK_THROWS_AS(gard::normalize(raw, gard::Domain::Normalized, gard::Domain::Raw8bit),
                    gard::config_error);  // declared domain must match the field
}

TEST_CASE("png round trip is lossless for integer fields") {
    const auto dir = scratch_dir("data_png");
    gard::ImageField img(24, 17, gard::Domain::Raw8bit);
    gard::SplitMix64 rng(7);
    for (double& v : img.values) v = static_cast<double>(rng.next_u64() % 256);
    const auto path = (dir / "img.png").string();
    gard::save_image(img, path);
    const auto back = gard::load_image(path);
    CHECK(back.height == 24);
    CHECK(back.width == 17);
    CHECK(back.domain == gard::Domain::Raw8bit);
    CHECK(back.values == img.values);
}

TEST_CASE("png save rounds and clips") {
    const auto dir = scratch_dir("data_png_clip");
    gard::ImageField img(1, 4, gard::Domain::Raw8bit);
    img.values = {-5.0, 12.4, 12.6, 300.0};
    const auto path = (dir / "img.png").string();
    gard::save_image(img, path);
    const auto back = gard::load_image(path);
    CHECK(back.values == std::vector<double>{0.0, 12.0, 13.0, 255.0});
}

TEST_CASE("color and 16-bit PNGs are rejected with a clear message") {
    const auto dir = scratch_dir("data_png_bad");
    const auto rgb = (dir / "rgb.png").string();
    write_png_raw(rgb, 8, 8, PNG_COLOR_TYPE_RGB, 8);
    CHECK_THROWS_WITH_AS(gard::load_image(rgb),
                         doctest::Contains("grayscale"), gard::data_error);
    const auto deep = (dir / "deep.png").string();
    write_png_raw(deep, 8, 8, PNG_COLOR_TYPE_GRAY, 16);
    CHECK_THROWS_WITH_AS(gard::load_image(deep),
                         doctest::Contains("16-bit"), gard::data_error);
    CHECK_THROWS_AS(gard::load_image((dir / "missing.png").string()), gard::data_error);
    const auto junk = (dir / "junk.png").string();
    {
        std::ofstream os(junk, std::ios::binary);
        os << "not a png at all";
    }
    CHECK_THROWS_AS(gard::load_image(junk), gard::data_error);
}

TEST_CASE("low bit-depth grayscale is widened on load") {
    const auto dir = scratch_dir("data_png_lowdepth");
    const auto path = (dir / "gray4.png").string();
    write_png_raw(path, 8, 8, PNG_COLOR_TYPE_GRAY, 4);
    const auto img = gard::load_image(path);
    CHECK(img.height == 8);
    CHECK(img.width == 8);
}

TEST_CASE("corpus write, manifest round trip, and regeneration") {
    const auto dir = scratch_dir("data_corpus");
    gard::CorpusManifest m;
    m.count = 3;
    m.seed = 77;
    gard::write_corpus(dir.string(), m);

    const auto m2 = gard::read_manifest(dir.string());
    CHECK(m2.count == 3);
    CHECK(m2.seed == 77);
    CHECK(m2.phantom.n_layers == m.phantom.n_layers);
    CHECK(m2.speckle.looks == doctest::Approx(m.speckle.looks));

    for (int i = 0; i < 3; ++i) {
        const auto name = gard::sample_name(i);
        CHECK(std::filesystem::exists(dir / "clean" / name));
        CHECK(std::filesystem::exists(dir / "noisy" / name));
        CHECK(std::filesystem::exists(dir / "avg" / name));
    }
    CHECK(gard::sample_name(0) == "0000.png");
    CHECK(gard::sample_name(123) == "0123.png");

    // regeneration into a second directory is byte-identical
    const auto dir2 = scratch_dir("data_corpus_regen");
    gard::write_corpus(dir2.string(), m2);
    for (int i = 0; i < 3; ++i)
        for (const char* sub : {"clean", "noisy", "avg"}) {
            CAPTURE(i);
            CAPTURE(sub);
            CHECK(testutil::same_bytes(dir / sub / gard::sample_name(i),
                                       dir2 / sub / gard::sample_name(i)));
        }

    // overwrite protection
    CHECK_THROWS_AS(gard::write_corpus(dir.string(), m), gard::data_error);
    CHECK_NOTHROW(gard::write_corpus(dir.string(), m, /*force=*/true));
}

TEST_CASE("generate_sample matches what write_corpus stored") {
    const auto dir = scratch_dir("data_corpus_sample");
    gard::CorpusManifest m;
    m.count = 2;
    m.seed = 31;
    gard::write_corpus(dir.string(), m);
    const auto mem = gard::generate_sample(m, 1);
    const auto disk = gard::load_sample(dir.string(), 1);
    // on-disk samples went through u8 quantization; compare after rounding
    for (size_t i = 0; i < mem.noisy.size(); ++i) {
        const double q = std::clamp(std::round(mem.noisy.values[i]), 0.0, 255.0);
        CHECK(disk.noisy.values[i] == q);
    }
}

TEST_CASE("samples differ across indices but reproduce per index") {
    gard::CorpusManifest m;
    m.count = 2;
    m.seed = 5;
    const auto a0 = gard::generate_sample(m, 0);
    const auto b0 = gard::generate_sample(m, 0);
    const auto a1 = gard::generate_sample(m, 1);
    CHECK(a0.clean.values == b0.clean.values);
    CHECK(a0.noisy.values == b0.noisy.values);
    CHECK(a0.clean.values != a1.clean.values);  // phantom varies with the index
}

TEST_CASE("load_clean_normalized yields training-ready fields") {
    const auto dir = scratch_dir("data_corpus_norm");
    gard::CorpusManifest m;
    m.count = 2;
    m.seed = 13;
    gard::write_corpus(dir.string(), m);
    const auto imgs = gard::load_clean_normalized(dir.string());
    REQUIRE(imgs.size() == 2);
    for (const auto& img : imgs) {
        CHECK(img.domain == gard::Domain::Normalized);
        const auto mm = moments(img.values);
        CHECK(mm.min >= -1.0);
        CHECK(mm.max <= 1.0);
    }
}

TEST_CASE("read_manifest on a missing or broken directory") {
    CHECK_THROWS_AS(gard::read_manifest((testutil::work_dir() / "no_such_dir").string()),
                    gard::data_error);
    const auto dir = scratch_dir("data_badmanifest");
    {
        std::ofstream os(dir / "manifest.json");
        os << "{ not json";
    }
    CHECK_THROWS_AS(gard::read_manifest(dir.string()), gard::data_error);
}

TEST_CASE("noisy-versus-clean psnr sits in the expected band") {
    // pins the end-to-end speckle strength at default parameters
    gard::CorpusManifest m;
    m.count = 20;
    m.seed = 99;
    double acc = 0.0;
    for (int i = 0; i < m.count; ++i) {
        const auto s = gard::generate_sample(m, i);
        acc += gard::psnr(s.noisy, s.clean);
    }
    const double mean_psnr = acc / m.count;
    CHECK(mean_psnr > 19.0);  // verified run: mean 19.96 dB (19.66..20.42 over the 20 samples)
    CHECK(mean_psnr < 21.0);
}

}  // TEST_SUITE
