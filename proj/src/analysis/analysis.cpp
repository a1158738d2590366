#include "hetbridge/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hetbridge::analysis {

namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 400;
constexpr double kLeft = kWidth * 0.1;
constexpr double kRight = kWidth * 0.9;
constexpr double kTop = kHeight * 0.1;
constexpr double kBottom = kHeight * 0.9;

const char* color_of(Protocol p) { return p == Protocol::mqtt ? "#1f77b4" : "#d62728"; }

std::string fixed(double v, int digits = 2) {
  if (v == 0.0) v = 0.0;  // no "-0.00"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::optional<std::uint64_t> parse_seq(const std::string& message) {
  constexpr std::string_view kPrefix = "seq-";
  if (message.size() <= kPrefix.size() || message.compare(0, kPrefix.size(), kPrefix) != 0) return std::nullopt;
  std::uint64_t v = 0;
  for (std::size_t i = kPrefix.size(); i < message.size(); ++i) {
    const char c = message[i];
    if (c < '0' || c > '9' || v > 1'000'000'000'000ULL) return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string svg_open(const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" viewBox=\"0 0 800 400\">\n"
    << "<rect width=\"800\" height=\"400\" fill=\"#ffffff\"/>\n"
    << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" << title
    << "</text>\n"
    << "<line class=\"axis\" x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kBottom) << "\" x2=\"" << fixed(kRight)
    << "\" y2=\"" << fixed(kBottom) << "\" stroke=\"#000000\"/>\n"
    << "<line class=\"axis\" x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft)
    << "\" y2=\"" << fixed(kBottom) << "\" stroke=\"#000000\"/>\n";
  return o.str();
}

std::string no_data_label() {
  return "<text x=\"400\" y=\"200\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">no data</text>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  std::ostringstream o;
  o << "<text x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" text-anchor=\"" << anchor
    << "\" font-family=\"sans-serif\" font-size=\"12\">" << s << "</text>\n";
  return o.str();
}

}  // namespace

std::vector<StoredReading> select_window(const std::vector<StoredReading>& readings, std::int64_t window_s) {
  if (readings.empty()) return {};
  Timestamp newest = readings.front().inserted_ts;
  for (const auto& r : readings) newest = std::max(newest, r.inserted_ts);
  ReadingsFilter f;
  const WindowRange w = window_ending_at(newest, window_s);
  f.since = w.since;
  f.until = w.until;
  std::vector<StoredReading> out;
  for (const auto& r : readings) {
    if (f.matches(r)) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const StoredReading& a, const StoredReading& b) {
    return a.inserted_ts != b.inserted_ts ? a.inserted_ts < b.inserted_ts : a.id < b.id;
  });
  return out;
}

std::string travel_time_csv(const std::vector<StoredReading>& readings, std::int64_t window_s) {
  std::string out = "inserted_ts,protocol,sec_diff\n";
  for (const auto& r : select_window(readings, window_s)) {
    out += r.inserted_ts.to_string();
    out += ',';
    out += to_string(r.protocol);
    out += ',';
    out += format_seconds(r.sec_diff);
    out += '\n';
  }
  return out;
}

DistributionSummary summarize_counts(std::size_t mqtt, std::size_t coap, std::int64_t window_s) {
  DistributionSummary s;
  s.mqtt = mqtt;
  s.coap = coap;
  s.window_s = window_s;
  s.empty = mqtt + coap == 0;
  if (!s.empty) {
    s.mqtt_pct = round1(100.0 * static_cast<double>(mqtt) / static_cast<double>(mqtt + coap));
    // Complement keeps the pair summing to exactly 100.0.
    s.coap_pct = round1(100.0 - s.mqtt_pct);
  }
  return s;
}

DistributionSummary distribution_summary(const std::vector<StoredReading>& readings, std::int64_t window_s) {
  ProtocolCounts c;
  for (const auto& r : select_window(readings, window_s)) ++c[r.protocol];
  return summarize_counts(c.mqtt, c.coap, window_s);
}

std::string distribution_csv(const DistributionSummary& s) {
  return "protocol,count,pct\nmqtt," + std::to_string(s.mqtt) + "," + fixed(s.mqtt_pct, 1) + "\ncoap," +
         std::to_string(s.coap) + "," + fixed(s.coap_pct, 1) + "\n";
}

LossReport loss_report(const std::vector<SendLogEntry>& send_log, const std::vector<StoredReading>& readings) {
  using Key = std::pair<std::string, std::uint64_t>;
  std::map<Key, const SendLogEntry*> sends;
  std::set<std::string> devices;
  LossReport r;
  for (const auto& e : send_log) {
    devices.insert(e.device);
    if (e.outcome == SendOutcome::send_failed) {
      ++r.send_failed;
      continue;
    }
    sends.emplace(Key{e.device, e.seq}, &e);
  }
  r.sent = sends.size();

  std::set<Key> delivered;
  for (const auto& row : readings) {
    if (!devices.count(row.device)) throw RunMismatch("device '" + row.device + "' is not in the send log");
    const auto seq = parse_seq(row.message);
    if (!seq) throw RunMismatch("reading " + std::to_string(row.id) + " has no seq-<n> message");
    auto it = sends.find(Key{row.device, *seq});
    // Same device name and seq from another run still differs in its origin timestamp.
    if (it == sends.end() || it->second->origin_ts != row.origin_ts || it->second->protocol != row.protocol) {
      throw RunMismatch("reading " + std::to_string(row.id) + " (" + row.device + " " + row.message +
                        ") matches no send in this run");
    }
    delivered.insert(it->first);
  }
  r.stored = delivered.size();
  r.lost = r.sent - r.stored;
  for (const auto& [key, e] : sends) {
    if (!delivered.count(key)) ++r.lost_by_protocol[e->protocol];
  }
  return r;
}

std::string to_json(const LossReport& r) {
  nlohmann::ordered_json j;
  j["sent"] = r.sent;
  j["send_failed"] = r.send_failed;
  j["stored"] = r.stored;
  j["lost"] = r.lost;
  j["lost_by_protocol"] = {{"mqtt", r.lost_by_protocol.mqtt}, {"coap", r.lost_by_protocol.coap}};
  return j.dump(2) + "\n";
}

std::string render_travel_svg(const std::vector<StoredReading>& rows, const std::string& title) {
  std::string out = svg_open(title);
  out += text(400, kHeight - 8, "seconds since first reading");
  out += "<text x=\"20\" y=\"200\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 20 200)\">travel time (s)</text>\n";
  if (rows.empty()) return out + no_data_label() + "</svg>\n";

  const std::int64_t t0 = rows.front().inserted_ts.micros();
  std::int64_t t1 = t0;
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& r : rows) {
    t1 = std::max(t1, r.inserted_ts.micros());
    lo = std::min(lo, to_seconds(r.sec_diff));
    hi = std::max(hi, to_seconds(r.sec_diff));
  }
  if (hi <= lo) hi = lo + 0.001;
  const double span_s = std::max(1e-6, static_cast<double>(t1 - t0) / 1e6);
  auto px = [&](const StoredReading& r) {
    return kLeft + (static_cast<double>(r.inserted_ts.micros() - t0) / 1e6) / span_s * (kRight - kLeft);
  };
  auto py = [&](double v) { return kBottom - (v - lo) / (hi - lo) * (kBottom - kTop); };

  out += text(kLeft - 6, kBottom + 4, fixed(lo, 3), "end");
  out += text(kLeft - 6, kTop + 4, fixed(hi, 3), "end");
  out += text(kLeft, kBottom + 16, "0");
  out += text(kRight, kBottom + 16, fixed(span_s, 1));

  double legend_y = kTop;
  for (Protocol p : {Protocol::mqtt, Protocol::coap}) {
    std::string points;
    for (const auto& r : rows) {
      if (r.protocol != p) continue;
      if (!points.empty()) points += ' ';
      points += fixed(px(r)) + "," + fixed(py(to_seconds(r.sec_diff)));
    }
    if (points.empty()) continue;
    out += "<polyline data-protocol=\"" + std::string(to_string(p)) + "\" fill=\"none\" stroke=\"" + color_of(p) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    out += "<rect x=\"" + fixed(kRight + 10) + "\" y=\"" + fixed(legend_y) + "\" width=\"12\" height=\"12\" fill=\"" +
           color_of(p) + "\"/>\n";
    out += text(kRight + 26, legend_y + 10, std::string(to_string(p)), "start");
    legend_y += 20;
  }
  return out + "</svg>\n";
}

std::string render_distribution_svg(const DistributionSummary& s, const std::string& title) {
  std::string out = svg_open(title);
  if (s.empty) return out + no_data_label() + "</svg>\n";

  const double max_count = static_cast<double>(std::max(s.mqtt, s.coap));
  const double slot = (kRight - kLeft) / 2;
  const double bar_w = slot * 0.5;
  int i = 0;
  for (Protocol p : {Protocol::mqtt, Protocol::coap}) {
    const std::size_t count = p == Protocol::mqtt ? s.mqtt : s.coap;
    const double pct = p == Protocol::mqtt ? s.mqtt_pct : s.coap_pct;
    const double h = static_cast<double>(count) / max_count * (kBottom - kTop);
    const double x = kLeft + slot * i + (slot - bar_w) / 2;
    out += "<rect data-protocol=\"" + std::string(to_string(p)) + "\" x=\"" + fixed(x) + "\" y=\"" +
           fixed(kBottom - h) + "\" width=\"" + fixed(bar_w) + "\" height=\"" + fixed(h) + "\" fill=\"" +
           color_of(p) + "\"/>\n";
    out += text(x + bar_w / 2, kBottom - h - 6, fixed(pct, 1) + "% (" + std::to_string(count) + ")");
    out += text(x + bar_w / 2, kBottom + 16, std::string(to_string(p)));
    ++i;
  }
  return out + "</svg>\n";
}

RunOutputs write_run_outputs(const std::filesystem::path& run_dir, const std::vector<StoredReading>& readings,
                             const std::vector<SendLogEntry>& send_log) {
  std::filesystem::create_directories(run_dir);
  RunOutputs out;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(run_dir / name, content);
    out.files.push_back(run_dir / name);
  };
  for (std::int64_t w : kTravelWindows) {
    const auto rows = select_window(readings, w);
    out.travel_rows[w] = rows.size();
    const std::string stem = "travel_" + std::to_string(w) + "s";
    emit(stem + ".csv", travel_time_csv(readings, w));
    emit(stem + ".svg", render_travel_svg(rows, "Travel time of protocols, last " + std::to_string(w) + " s"));
  }
  for (std::int64_t w : kDistributionWindows) {
    const auto s = distribution_summary(readings, w);
    out.distributions[w] = s;
    const std::string stem = "dist_" + std::to_string(w) + "s";
    emit(stem + ".csv", distribution_csv(s));
    emit(stem + ".svg", render_distribution_svg(s, "Distribution of received messages, last " + std::to_string(w) + " s"));
  }
  out.loss = loss_report(send_log, readings);
  emit("loss.json", to_json(out.loss));
  return out;
}

}  // namespace hetbridge::analysis
