#include <gtest/gtest.h>
#include <unistd.h>

#include <fstream>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "hetbridge/analysis/analysis.hpp"
#include "support/oracles.hpp"

using namespace hetbridge;
using namespace hetbridge::analysis;
using namespace std::chrono_literals;

namespace {

const Timestamp kT0 = *Timestamp::parse("2024-03-01T12:00:00.000000Z");

// A run of `n` sends per device, one per second, every one stored.
struct SyntheticRun {
  std::vector<SendLogEntry> sends;
  std::vector<StoredReading> readings;
};

SyntheticRun synthetic_run(int mqtt, int coap, int n, std::uint64_t seed = 1) {
  oracle::Rng rng(seed);
  SyntheticRun run;
  std::int64_t id = 1;
  for (int k = 0; k < n; ++k) {
    for (int d = 0; d < mqtt + coap; ++d) {
      const Protocol p = d < mqtt ? Protocol::mqtt : Protocol::coap;
      const std::string dev = std::string(to_string(p)) + "-" + std::to_string(d < mqtt ? d + 1 : d - mqtt + 1);
      const Timestamp origin = kT0 + std::chrono::seconds(k) + std::chrono::milliseconds(d * 10);
      run.sends.push_back({dev, p, static_cast<std::uint64_t>(k), origin, SendOutcome::sent});
      const auto travel = std::chrono::microseconds(300 + static_cast<std::int64_t>(rng() % 2000));
      run.readings.push_back({id++, dev, p, "seq-" + std::to_string(k), origin, origin + travel, travel});
    }
  }
  std::sort(run.readings.begin(), run.readings.end(),
            [](const auto& a, const auto& b) { return a.inserted_ts < b.inserted_ts; });
  for (std::size_t i = 0; i < run.readings.size(); ++i) run.readings[i].id = static_cast<std::int64_t>(i + 1);
  return run;
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Distribution, Examples) {
  auto s = summarize_counts(77, 73);
  EXPECT_DOUBLE_EQ(s.mqtt_pct, 51.3);
  EXPECT_DOUBLE_EQ(s.coap_pct, 48.7);
  s = summarize_counts(5, 5);
  EXPECT_DOUBLE_EQ(s.mqtt_pct, 50.0);
  EXPECT_DOUBLE_EQ(s.coap_pct, 50.0);
  s = summarize_counts(0, 0);
  EXPECT_TRUE(s.empty);
  EXPECT_EQ(s.mqtt_pct + s.coap_pct, 0.0);
  EXPECT_EQ(distribution_csv(summarize_counts(77, 73)), "protocol,count,pct\nmqtt,77,51.3\ncoap,73,48.7\n");
  EXPECT_EQ(distribution_csv(summarize_counts(0, 0)), "protocol,count,pct\nmqtt,0,0.0\ncoap,0,0.0\n");
}

TEST(Distribution, PercentagesAgainstIntegerOracle) {
  for (std::size_t m = 0; m <= 200; ++m) {
    for (std::size_t c = 0; c <= 200; ++c) {
      if (m + c == 0) continue;
      const auto s = summarize_counts(m, c);
      const std::size_t total = m + c;
      // Tenths of a percent, rounded half up, in exact integer arithmetic.
      const std::size_t tenths = (2000 * m + total) / (2 * total);
      ASSERT_EQ(std::llround(s.mqtt_pct * 10), static_cast<long long>(tenths)) << m << "/" << c;
      ASSERT_EQ(std::llround((s.mqtt_pct + s.coap_pct) * 10), 1000) << m << "/" << c;
    }
  }
}

TEST(Distribution, WindowAnchoredAtNewest) {
  const auto run = synthetic_run(5, 5, 30);
  EXPECT_EQ(distribution_summary(run.readings, 30).mqtt, 150u);
  EXPECT_EQ(distribution_summary(run.readings, 30).coap, 150u);
  const auto one = distribution_summary(run.readings, 1);
  EXPECT_EQ(one.mqtt + one.coap, 10u);
  EXPECT_TRUE(distribution_summary({}, 5).empty);
}

TEST(Window, SelectMatchesBruteForce) {
  const auto run = synthetic_run(3, 2, 40, 9);
  Timestamp newest;
  for (const auto& r : run.readings) newest = std::max(newest, r.inserted_ts);
  for (std::int64_t w : {1, 2, 5, 10, 30, 100}) {
    const auto rows = select_window(run.readings, w);
    std::size_t expected = 0;
    for (const auto& r : run.readings) {
      const auto age = newest - r.inserted_ts;
      if (age < std::chrono::seconds(w)) ++expected;
    }
    EXPECT_EQ(rows.size(), expected) << w;
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i - 1].inserted_ts, rows[i].inserted_ts);
  }
}

TEST(TravelCsv, HeaderAndRows) {
  const auto run = synthetic_run(1, 1, 10);
  const auto csv = travel_time_csv(run.readings, 5);
  EXPECT_EQ(csv.rfind("inserted_ts,protocol,sec_diff\n", 0), 0u);
  const auto rows = select_window(run.readings, 5);
  EXPECT_EQ(count_of(csv, "\n"), rows.size() + 1);
  const std::regex line(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{6}Z,(mqtt|coap),-?\d+\.\d{6})");
  std::istringstream in(csv);
  std::string l;
  std::getline(in, l);
  for (std::size_t i = 0; std::getline(in, l); ++i) {
    ASSERT_TRUE(std::regex_match(l, line)) << l;
    EXPECT_EQ(l.substr(l.rfind(',') + 1), format_seconds(rows[i].sec_diff));
  }
  EXPECT_EQ(travel_time_csv({}, 5), "inserted_ts,protocol,sec_diff\n");
}

TEST(Loss, PerfectRun) {
  const auto run = synthetic_run(5, 5, 30);
  const auto r = loss_report(run.sends, run.readings);
  EXPECT_EQ(r.sent, 300u);
  EXPECT_EQ(r.stored, 300u);
  EXPECT_EQ(r.lost, 0u);
  EXPECT_EQ(r.send_failed, 0u);
}

TEST(Loss, ThreeLostAndOneFailed) {
  auto run = synthetic_run(2, 2, 10);
  std::vector<StoredReading> kept;
  int dropped_coap = 0;
  for (const auto& row : run.readings) {
    if (row.protocol == Protocol::coap && row.message == "seq-3" && dropped_coap < 2) {
      ++dropped_coap;
      continue;
    }
    if (row.device == "mqtt-1" && row.message == "seq-9") continue;
    kept.push_back(row);
  }
  run.sends.push_back({"mqtt-2", Protocol::mqtt, 10, kT0 + 10s, SendOutcome::send_failed});
  const auto r = loss_report(run.sends, kept);
  EXPECT_EQ(r.sent, 40u);
  EXPECT_EQ(r.send_failed, 1u);
  EXPECT_EQ(r.stored, 37u);
  EXPECT_EQ(r.lost, 3u);
  EXPECT_EQ(r.lost_by_protocol.coap, 2u);
  EXPECT_EQ(r.lost_by_protocol.mqtt, 1u);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["lost"], 3);
  EXPECT_EQ(j["lost_by_protocol"]["coap"], 2);
}

TEST(Loss, MismatchedRunIsRejected) {
  const auto a = synthetic_run(1, 1, 5);
  auto stranger = a.readings;
  stranger.push_back({99, "mqtt-7", Protocol::mqtt, "seq-0", kT0, kT0 + 1ms, 1ms});
  EXPECT_THROW(loss_report(a.sends, stranger), RunMismatch);

  auto no_seq = a.readings;
  no_seq[0].message = "hello";
  EXPECT_THROW(loss_report(a.sends, no_seq), RunMismatch);

  // Same names and seqs, but sent at another time.
  auto shifted = a.readings;
  for (auto& r : shifted) r.origin_ts = r.origin_ts + 1h;
  EXPECT_THROW(loss_report(a.sends, shifted), RunMismatch);
}

TEST(Svg, TravelChartPolylines) {
  const auto run = synthetic_run(2, 3, 10);
  const auto rows = select_window(run.readings, 30);
  const auto svg = render_travel_svg(rows, "travel");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("width=\"800\" height=\"400\""), std::string::npos);
  EXPECT_EQ(count_of(svg, "<polyline"), 2u);
  EXPECT_EQ(count_of(svg, "data-protocol=\"mqtt\""), 1u);
  EXPECT_EQ(count_of(svg, "data-protocol=\"coap\""), 1u);
  // One vertex per reading.
  const std::regex points("points=\"([^\"]*)\"");
  std::size_t vertices = 0;
  for (std::sregex_iterator it(svg.begin(), svg.end(), points), end; it != end; ++it) {
    vertices += count_of((*it)[1].str(), ",");
  }
  EXPECT_EQ(vertices, rows.size());
  EXPECT_EQ(render_travel_svg(rows, "travel"), svg);

  std::vector<StoredReading> only_mqtt;
  for (const auto& r : rows) {
    if (r.protocol == Protocol::mqtt) only_mqtt.push_back(r);
  }
  EXPECT_EQ(count_of(render_travel_svg(only_mqtt, "t"), "<polyline"), 1u);
  const auto empty = render_travel_svg({}, "t");
  EXPECT_EQ(count_of(empty, "<polyline"), 0u);
  EXPECT_NE(empty.find("no data"), std::string::npos);
}

TEST(Svg, VerticesStayInsidePlotArea) {
  auto run = synthetic_run(1, 1, 20, 3);
  run.readings[3].sec_diff = -250ms;
  const auto svg = render_travel_svg(select_window(run.readings, 30), "t");
  const std::regex vertex(R"((-?\d+\.\d{2}),(-?\d+\.\d{2}))");
  const auto pts_begin = svg.find("<polyline");
  const std::string tail = svg.substr(pts_begin);
  for (std::sregex_iterator it(tail.begin(), tail.end(), vertex), end; it != end; ++it) {
    const double x = std::stod((*it)[1]);
    const double y = std::stod((*it)[2]);
    EXPECT_GE(x, 80.0);
    EXPECT_LE(x, 720.0);
    EXPECT_GE(y, 40.0);
    EXPECT_LE(y, 360.0);
  }
}

TEST(Svg, DistributionChart) {
  const auto svg = render_distribution_svg(summarize_counts(77, 73, 5), "dist");
  EXPECT_NE(svg.find("51.3% (77)"), std::string::npos);
  EXPECT_NE(svg.find("48.7% (73)"), std::string::npos);
  EXPECT_EQ(count_of(svg, "<rect data-protocol"), 2u);
  EXPECT_NE(render_distribution_svg(summarize_counts(0, 0), "d").find("no data"), std::string::npos);
}

TEST(RunOutputs, WritesEveryArtifactDeterministically) {
  const auto run = synthetic_run(5, 5, 30);
  const auto dir = std::filesystem::temp_directory_path() / ("hetbridge-analysis-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  const auto out = write_run_outputs(dir, run.readings, run.sends);
  const std::set<std::string> expected{"travel_5s.csv", "travel_5s.svg", "travel_10s.csv", "travel_10s.svg",
                                       "travel_30s.csv", "travel_30s.svg", "dist_1s.csv",   "dist_1s.svg",
                                       "dist_5s.csv",   "dist_5s.svg",   "dist_30s.csv",  "dist_30s.svg",
                                       "loss.json"};
  std::set<std::string> written;
  for (const auto& f : out.files) written.insert(f.filename().string());
  EXPECT_EQ(written, expected);
  std::map<std::string, std::string> first;
  for (const auto& f : out.files) first[f.filename().string()] = slurp(f);
  write_run_outputs(dir, run.readings, run.sends);
  for (const auto& f : out.files) EXPECT_EQ(slurp(f), first[f.filename().string()]) << f;
  EXPECT_EQ(out.distributions.at(30).mqtt, 150u);
  EXPECT_EQ(out.loss.lost, 0u);
  std::filesystem::remove_all(dir);
}
