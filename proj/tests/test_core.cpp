#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "marc/io.hpp"
#include "marc/rng.hpp"
#include "marc/tensor.hpp"

using namespace marc;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("tensor shape/data consistency") {
  Tensor<float> t(Shape{2, 3, 4}, 1.5f);
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  t(1, 2, 3) = 7.0f;
  CHECK(t[23] == 7.0f);
  CHECK_THROWS_AS(Tensor<float>(Shape{}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), std::invalid_argument);
}

TEST_CASE("rng determinism and degenerate interval") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
  Rng r(1);
  CHECK(r.uniform(3.0, 3.0) == 3.0);
  CHECK_THROWS_AS(r.uniform(2.0, 1.0), std::invalid_argument);
}

TEST_CASE("rng uniform mean over 1e5 draws") {
  Rng r(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform(0.0, 1.0);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("rng derived streams differ") {
  Rng a = Rng::derived(5, 0);
  Rng b = Rng::derived(5, 1);
  CHECK(a.next() != b.next());
}

TEST_CASE("mrt roundtrip is bit-exact") {
  const std::string path = tmp_path("marc_rt.mrt");

  SUBCASE("f32") {
    Tensor<float> t(Shape{3, 5});
    Rng r(1);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(r.uniform(-1, 1));
    write_mrt(path, t);
    CHECK(read_mrt<float>(path) == t);
  }
  SUBCASE("f64") {
    Tensor<double> t(Shape{4}, 0.25);
    t[2] = -1e-300;
    write_mrt(path, t);
    CHECK(read_mrt<double>(path) == t);
  }
  SUBCASE("complex64") {
    ComplexTensor<float> t(Shape{2, 2});
    t(0, 1) = {1.5f, -2.5f};
    write_mrt(path, t);
    CHECK(read_mrt<std::complex<float>>(path) == t);
  }
  SUBCASE("unit dimensions") {
    Tensor<float> t(Shape{1, 7, 1}, 3.0f);
    write_mrt(path, t);
    CHECK(read_mrt<float>(path) == t);
  }
}

TEST_CASE("mrt error taxonomy") {
  const std::string path = tmp_path("marc_bad.mrt");

  SUBCASE("bad magic") {
    std::ofstream f(path, std::ios::binary);
    f << "XXXXXXXX" << std::string(20, '\0');
    f.close();
    CHECK_THROWS_AS(read_mrt<float>(path), MrtBadMagic);
  }
  SUBCASE("bad version") {
    std::ofstream f(path, std::ios::binary);
    f << "MARCTNSR";
    const unsigned char rest[] = {9, 0, 1, 0, 1, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(rest), sizeof(rest));
    f.close();
    CHECK_THROWS_AS(read_mrt<float>(path), MrtBadVersion);
  }
  SUBCASE("bad dtype") {
    std::ofstream f(path, std::ios::binary);
    f << "MARCTNSR";
    const unsigned char rest[] = {1, 7, 1, 0, 1, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(rest), sizeof(rest));
    f.close();
    CHECK_THROWS_AS(read_mrt<float>(path), MrtBadDtype);
  }
  SUBCASE("dtype mismatch on typed read") {
    Tensor<double> t(Shape{2}, 1.0);
    write_mrt(path, t);
    CHECK_THROWS_AS(read_mrt<float>(path), MrtBadDtype);
  }
  SUBCASE("truncated payload: 10 declared, 9 present") {
    std::ofstream f(path, std::ios::binary);
    f << "MARCTNSR";
    const unsigned char head[] = {1, 0, 1, 0, 10, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(head), sizeof(head));
    const std::vector<float> nine(9, 1.0f);
    f.write(reinterpret_cast<const char*>(nine.data()), 9 * sizeof(float));
    f.close();
    CHECK_THROWS_AS(read_mrt<float>(path), MrtTruncated);
  }
  SUBCASE("non-finite payload") {
    std::ofstream f(path, std::ios::binary);
    f << "MARCTNSR";
    const unsigned char head[] = {1, 0, 1, 0, 2, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(head), sizeof(head));
    const float vals[2] = {1.0f, std::numeric_limits<float>::infinity()};
    f.write(reinterpret_cast<const char*>(vals), sizeof(vals));
    f.close();
    CHECK_THROWS_AS(read_mrt<float>(path), MrtNonFinite);
  }
  SUBCASE("non-finite rejected on write") {
    Tensor<float> t(Shape{2}, 0.0f);
    t[1] = std::nanf("");
    CHECK_THROWS_AS(write_mrt(path, t), MrtNonFinite);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_mrt<float>(tmp_path("does_not_exist.mrt")), MrtFileError);
  }
}

TEST_CASE("read_mrt_any dispatches on stored dtype") {
  const std::string path = tmp_path("marc_any.mrt");
  Tensor<double> t(Shape{3}, 2.0);
  write_mrt(path, t);
  AnyTensor any = read_mrt_any(path);
  CHECK(std::holds_alternative<Tensor<double>>(any));
  CHECK(read_mrt_f32(path)[0] == 2.0f);
}

TEST_CASE("pgm export writes a parseable P5 header") {
  const std::string path = tmp_path("marc_img.pgm");
  Tensor<float> img(Shape{4, 6}, 0.5f);
  write_pgm16(path, img);
  std::ifstream f(path, std::ios::binary);
  std::string magic;
  int w, h, maxval;
  f >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == 6);
  CHECK(h == 4);
  CHECK(maxval == 65535);
  f.get();
  std::vector<unsigned char> payload(4 * 6 * 2);
  f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  CHECK(f.gcount() == static_cast<std::streamsize>(payload.size()));
  const int v = payload[0] << 8 | payload[1];
  CHECK(v == 32768);  // round(0.5 * 65535)
}
