#include "igasil/plot.hpp"
#include "igasil/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <regex>

using namespace igasil;
namespace fs = std::filesystem;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::vector<std::string> polyline_points(const std::string& svg) {
  std::vector<std::string> out;
  const std::regex re("<polyline[^>]*points=\"([^\"]*)\"");
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) out.push_back((*it)[1]);
  return out;
}

void write_metrics(const fs::path& p, const std::vector<std::pair<int, double>>& rows) {
  std::ofstream f(p);
  f << kMetricsHeader << '\n';
  for (auto [ep, r] : rows) f << ep << ',' << r << ",0,0,0,0,0,0,0,0,0,0,0,0\n";
}

}  // namespace

TEST_SUITE("plot") {

TEST_CASE("identical inputs overlap exactly") {
  testing::TempDir dir("plot");
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  const std::vector<std::pair<int, double>> rows{{1000, -3.5}, {2000, 4.0}, {3000, 11.0}};
  write_metrics(dir / "a" / "metrics.csv", rows);
  write_metrics(dir / "b" / "metrics.csv", rows);
  const std::string svg = plot_metrics({dir / "a" / "metrics.csv", dir / "b" / "metrics.csv"});
  const auto pts = polyline_points(svg);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == pts[1]);
  CHECK(svg.find("a/metrics.csv") != std::string::npos);
  CHECK(svg.find("b/metrics.csv") != std::string::npos);
  CHECK(svg.find(">episodes<") != std::string::npos);
  CHECK(svg.find(">return<") != std::string::npos);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(plot_metrics({dir / "a" / "metrics.csv", dir / "b" / "metrics.csv"}) == svg);
}

TEST_CASE("header-only input draws axes only") {
  testing::TempDir dir("plot_empty");
  write_metrics(dir / "metrics.csv", {});
  const std::string svg = plot_metrics({dir / "metrics.csv"});
  CHECK(polyline_points(svg).empty());
  CHECK(count_of(svg, "<line") >= 2);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(render_svg({}, {}).find("</svg>") != std::string::npos);
}

TEST_CASE("schema errors name the column") {
  testing::TempDir dir("plot_bad");
  {
    std::ofstream f(dir / "bad.csv");
    f << "window_end_episode,mean_reward,max_return\n1000,1,2\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics_curve(dir / "bad.csv"), doctest::Contains("mean_reward"), std::runtime_error);
  {
    std::ofstream f(dir / "short.csv");
    f << "window_end_episode,mean_return\n1000,1\n";
  }
  CHECK_THROWS_WITH_AS(read_metrics_curve(dir / "short.csv"), doctest::Contains("max_return"), std::runtime_error);
  CHECK_THROWS_AS(read_metrics_curve(dir / "absent.csv"), std::runtime_error);
}

TEST_CASE("curve points stay inside the plot frame") {
  Series s{"run", {}, {}};
  for (int i = 1; i <= 20; ++i) {
    s.x.push_back(1000.0 * i);
    s.y.push_back(i % 3 == 0 ? -30.0 : 11.0);
  }
  const std::string svg = render_svg({s}, {});
  const auto pts = polyline_points(svg);
  REQUIRE(pts.size() == 1);
  std::stringstream ss(pts[0]);
  std::string pair;
  int n = 0;
  while (ss >> pair) {
    const auto comma = pair.find(',');
    const double x = std::stod(pair.substr(0, comma)), y = std::stod(pair.substr(comma + 1));
    CHECK(x >= 0);
    CHECK(x <= 800);
    CHECK(y >= 0);
    CHECK(y <= 480);
    ++n;
  }
  CHECK(n == 20);
}

TEST_CASE("single point and flat curves render") {
  Series one{"one", {1000.0}, {5.0}};
  Series flat{"flat", {1000.0, 2000.0}, {3.0, 3.0}};
  for (const auto& s : {one, flat}) {
    const std::string svg = render_svg({s}, {});
    CHECK(svg.find("nan") == std::string::npos);
    CHECK(svg.find("inf") == std::string::npos);
  }
}

}  // TEST_SUITE
