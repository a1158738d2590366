#include <gtest/gtest.h>

#include <atomic>
#include <condition_variable>
#include <mutex>

#include "hetbridge/mqtt/broker.hpp"
#include "hetbridge/mqtt/client.hpp"
#include "hetbridge/mqtt/codec.hpp"
#include "hetbridge/mqtt/topic.hpp"
#include "support/oracles.hpp"

using namespace hetbridge;
using namespace hetbridge::mqtt;
using namespace std::chrono_literals;

namespace {

CodecError::Kind decode_error(const Bytes& b) {
  try {
    decode_packet(b);
  } catch (const CodecError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decoded without error";
  return CodecError::Kind::invariant_violation;
}

CodecError::Kind encode_error(const Packet& p) {
  try {
    encode_packet(p);
  } catch (const CodecError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "encoded without error";
  return CodecError::Kind::out_of_range;
}

// Collects messages delivered to a client handler.
struct Inbox {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::pair<std::string, std::string>> items;

  MessageHandler handler() {
    return [this](const std::string& t, const std::string& p) {
      std::lock_guard lock(mu);
      items.emplace_back(t, p);
      cv.notify_all();
    };
  }
  bool wait_for(std::size_t n, std::chrono::milliseconds timeout = 2000ms) {
    std::unique_lock lock(mu);
    return cv.wait_for(lock, timeout, [&] { return items.size() >= n; });
  }
  std::size_t size() {
    std::lock_guard lock(mu);
    return items.size();
  }
};

}  // namespace

TEST(RemainingLength, Examples) {
  EXPECT_EQ(encode_remaining_length(0), (Bytes{0x00}));
  EXPECT_EQ(encode_remaining_length(127), (Bytes{0x7F}));
  EXPECT_EQ(encode_remaining_length(321), (Bytes{0xC1, 0x02}));
  EXPECT_EQ(encode_remaining_length(kMaxRemainingLength), (Bytes{0xFF, 0xFF, 0xFF, 0x7F}));
  const auto d = decode_remaining_length(Bytes{0xC1, 0x02});
  EXPECT_EQ(d.value, 321u);
  EXPECT_EQ(d.consumed, 2u);
  EXPECT_EQ(decode_remaining_length(Bytes{0x00}).consumed, 1u);
}

TEST(RemainingLength, Errors) {
  try {
    encode_remaining_length(kMaxRemainingLength + 1);
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.kind(), CodecError::Kind::out_of_range);
  }
  try {
    decode_remaining_length(Bytes{0x80, 0x80, 0x80, 0x80, 0x01});
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.kind(), CodecError::Kind::overlong);
  }
  try {
    decode_remaining_length(Bytes{0x80, 0x80});
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.kind(), CodecError::Kind::truncated);
  }
}

TEST(RemainingLength, MatchesOracleAtBoundariesAndSamples) {
  for (std::uint32_t n : {0u, 1u, 127u, 128u, 16383u, 16384u, 2097151u, 2097152u, 268435455u}) {
    EXPECT_EQ(encode_remaining_length(n), oracle::remaining_length(n)) << n;
    EXPECT_EQ(decode_remaining_length(oracle::remaining_length(n)).value, n);
  }
  oracle::Rng rng(5);
  std::uniform_int_distribution<std::uint32_t> any(0, kMaxRemainingLength);
  for (int i = 0; i < 20000; ++i) {
    const auto n = any(rng);
    const auto enc = encode_remaining_length(n);
    ASSERT_EQ(enc, oracle::remaining_length(n)) << n;
    const auto dec = decode_remaining_length(enc);
    ASSERT_EQ(dec.value, n);
    ASSERT_EQ(dec.consumed, enc.size());
  }
}

TEST(PacketCodec, HandEncodedExamples) {
  EXPECT_EQ(encode_packet(Pingreq{}), (Bytes{0xC0, 0x00}));
  Publish p;
  p.topic = "a";
  p.payload = "x";
  EXPECT_EQ(encode_packet(p), (Bytes{0x30, 0x04, 0x00, 0x01, 0x61, 0x78}));
  EXPECT_EQ(encode_packet(Connack{false, 0}), (Bytes{0x20, 0x02, 0x00, 0x00}));
  EXPECT_EQ(encode_packet(Disconnect{}), (Bytes{0xE0, 0x00}));
  EXPECT_EQ(encode_packet(Puback{0x1234}), (Bytes{0x40, 0x02, 0x12, 0x34}));
  // CONNECT "c", clean session, keep-alive 60.
  EXPECT_EQ(encode_packet(Connect{"c", true, 60, 4}),
            (Bytes{0x10, 0x0D, 0x00, 0x04, 'M', 'Q', 'T', 'T', 0x04, 0x02, 0x00, 0x3C, 0x00, 0x01, 'c'}));
  Subscribe s;
  s.packet_id = 10;
  s.topics = {{"a/+", 1}};
  EXPECT_EQ(encode_packet(s), (Bytes{0x82, 0x08, 0x00, 0x0A, 0x00, 0x03, 'a', '/', '+', 0x01}));
}

TEST(PacketCodec, DecodeExamples) {
  const auto d = decode_packet(Bytes{0xC0, 0x00});
  EXPECT_TRUE(std::holds_alternative<Pingreq>(d.packet));
  EXPECT_EQ(d.consumed, 2u);
  try {
    decode_packet(Bytes{0xF0, 0x00});
    FAIL();
  } catch (const CodecError& e) {
    EXPECT_EQ(e.kind(), CodecError::Kind::unknown_packet_type);
    EXPECT_NE(std::string(e.what()).find("15"), std::string::npos);
  }
}

TEST(PacketCodec, DecodeErrors) {
  EXPECT_EQ(decode_error({0x30, 0x05, 0x00, 0x01, 'a'}), CodecError::Kind::truncated);
  EXPECT_EQ(decode_error({}), CodecError::Kind::truncated);
  EXPECT_EQ(decode_error({0x36, 0x04, 0x00, 0x01, 'a', 'x'}), CodecError::Kind::malformed_body);  // qos 3
  EXPECT_EQ(decode_error({0x38, 0x04, 0x00, 0x01, 'a', 'x'}), CodecError::Kind::malformed_body);  // DUP on qos 0
  EXPECT_EQ(decode_error({0x80, 0x06, 0x00, 0x01, 0x00, 0x01, 'a', 0x00}), CodecError::Kind::malformed_body);
  EXPECT_EQ(decode_error({0xC0, 0x01, 0x00}), CodecError::Kind::malformed_body);
  EXPECT_EQ(decode_error({0x00, 0x00}), CodecError::Kind::unknown_packet_type);
}

TEST(PacketCodec, EncodeInvariants) {
  Publish p;
  p.topic = "t";
  p.packet_id = 5;
  EXPECT_EQ(encode_error(p), CodecError::Kind::invariant_violation);
  p.packet_id.reset();
  p.qos = 1;
  EXPECT_EQ(encode_error(p), CodecError::Kind::invariant_violation);
  Subscribe s;
  s.packet_id = 0;
  s.topics = {{"a", 0}};
  EXPECT_EQ(encode_error(s), CodecError::Kind::invariant_violation);
  s.packet_id = 1;
  s.topics.clear();
  EXPECT_EQ(encode_error(s), CodecError::Kind::invariant_violation);
}

TEST(PacketCodec, RoundTripProperty) {
  oracle::Rng rng(20240301);
  for (int i = 0; i < 3000; ++i) {
    const Packet p = oracle::random_packet(rng);
    const Bytes wire = encode_packet(p);
    const auto d = decode_packet(wire);
    ASSERT_EQ(d.packet, p) << "iteration " << i << " type " << packet_name(packet_type(p));
    ASSERT_EQ(d.consumed, wire.size());
  }
}

TEST(PacketCodec, DecodesFrontOfConcatenatedStream) {
  Bytes stream = encode_packet(Pingreq{});
  const Bytes second = encode_packet(Puback{7});
  stream.insert(stream.end(), second.begin(), second.end());
  const auto first = decode_packet(stream);
  EXPECT_EQ(first.consumed, 2u);
  EXPECT_EQ(decode_packet(std::span(stream).subspan(first.consumed)).packet, Packet(Puback{7}));
}

TEST(Topic, Examples) {
  EXPECT_TRUE(topic_matches("#", "iot/dev1/data"));
  EXPECT_TRUE(topic_matches("iot/+/data", "iot/dev1/data"));
  EXPECT_FALSE(topic_matches("iot/+/data", "iot/dev1/extra/data"));
  EXPECT_TRUE(topic_matches("iot/#", "iot"));
  EXPECT_FALSE(topic_matches("+/x", "$SYS/x"));
  EXPECT_THROW(topic_matches("a/#/b", "a/x/b"), InvalidFilter);
  EXPECT_THROW(topic_matches("a/b+", "a/b"), InvalidFilter);
  EXPECT_FALSE(is_valid_filter(""));
  EXPECT_FALSE(is_valid_topic("a/+"));
}

TEST(Topic, MatchesLevelWiseOracle) {
  oracle::Rng rng(99);
  const std::vector<std::string> levels = {"iot", "a", "b", "data", "", "x1"};
  std::uniform_int_distribution<std::size_t> pick(0, levels.size() - 1);
  std::uniform_int_distribution<int> depth(1, 4);
  for (int i = 0; i < 5000; ++i) {
    std::string topic;
    const int n = depth(rng);
    for (int k = 0; k < n; ++k) topic += (k ? "/" : "") + levels[pick(rng)];
    if (topic.empty()) topic = "t";
    // Build filters from the same vocabulary so matches are common.
    std::string filter;
    const int m = depth(rng);
    for (int k = 0; k < m; ++k) {
      const auto r = rng() % 5;
      const std::string level = r == 0 ? "+" : (r == 1 && k == m - 1) ? "#" : levels[pick(rng)];
      filter += (k ? "/" : "") + level;
    }
    if (filter.empty()) filter = "t";
    ASSERT_EQ(topic_matches(filter, topic), oracle::topic_matches(filter, topic)) << filter << " vs " << topic;
  }
}

TEST(BrokerStep, FanoutToSingleSubscriber) {
  BrokerState st;
  SessionContext sub{1, std::nullopt};
  auto r = broker_step(st, sub, Connect{"sub", true, 0, 4});
  ASSERT_EQ(r.outbound.size(), 1u);
  EXPECT_EQ(r.outbound[0].packet, Packet(Connack{false, 0}));
  sub.client_id = r.bound_client_id;
  broker_step(st, sub, Subscribe{1, {{"iot/+/data", 0}}});

  SessionContext pub{2, std::nullopt};
  pub.client_id = broker_step(st, pub, Connect{"pub", true, 0, 4}).bound_client_id;
  Publish p;
  p.topic = "iot/d1/data";
  p.payload = "m";
  r = broker_step(st, pub, p);
  ASSERT_EQ(r.outbound.size(), 1u);
  EXPECT_EQ(r.outbound[0].client_id, "sub");
  EXPECT_EQ(r.outbound[0].session, 1u);
  EXPECT_EQ(r.outbound[0].packet, Packet(p));
}

TEST(BrokerStep, Qos1AckedWithoutSubscribers) {
  BrokerState st;
  SessionContext c1{1, std::nullopt};
  c1.client_id = broker_step(st, c1, Connect{"c1", true, 0, 4}).bound_client_id;
  Publish p;
  p.topic = "iot/c1/data";
  p.qos = 1;
  p.packet_id = 9;
  const auto r = broker_step(st, c1, p);
  ASSERT_EQ(r.outbound.size(), 1u);
  EXPECT_EQ(r.outbound[0].client_id, "c1");
  EXPECT_EQ(r.outbound[0].packet, Packet(Puback{9}));
}

TEST(BrokerStep, SubackGrantsQosZero) {
  BrokerState st;
  SessionContext c{1, std::nullopt};
  c.client_id = broker_step(st, c, Connect{"c", true, 0, 4}).bound_client_id;
  const auto r = broker_step(st, c, Subscribe{3, {{"#", 1}, {"a/#/b", 0}, {"x", 2}}});
  ASSERT_EQ(r.outbound.size(), 1u);
  EXPECT_EQ(r.outbound[0].packet, Packet(Suback{3, {0, kSubackFailure, 0}}));
}

TEST(BrokerStep, DeliveriesAreDowngradedToQosZero) {
  BrokerState st;
  SessionContext s{1, std::nullopt};
  s.client_id = broker_step(st, s, Connect{"s", true, 0, 4}).bound_client_id;
  broker_step(st, s, Subscribe{1, {{"#", 1}}});
  Publish p;
  p.topic = "t";
  p.qos = 1;
  p.packet_id = 4;
  p.retain = true;
  const auto r = broker_step(st, s, p);
  ASSERT_EQ(r.outbound.size(), 2u);
  const auto& copy = std::get<Publish>(r.outbound[0].packet);
  EXPECT_EQ(copy.qos, 0);
  EXPECT_FALSE(copy.packet_id);
  EXPECT_FALSE(copy.retain);
}

TEST(BrokerStep, OneCopyPerSessionWithOverlappingFilters) {
  BrokerState st;
  SessionContext s{1, std::nullopt};
  s.client_id = broker_step(st, s, Connect{"s", true, 0, 4}).bound_client_id;
  broker_step(st, s, Subscribe{1, {{"#", 0}, {"iot/+/data", 0}, {"iot/d/data", 0}}});
  SessionContext t{2, std::nullopt};
  t.client_id = broker_step(st, t, Connect{"t", true, 0, 4}).bound_client_id;
  broker_step(st, t, Subscribe{1, {{"iot/#", 0}}});
  Publish p;
  p.topic = "iot/d/data";
  const auto r = broker_step(st, s, p);
  ASSERT_EQ(r.outbound.size(), 2u);
  EXPECT_NE(r.outbound[0].client_id, r.outbound[1].client_id);
}

TEST(BrokerStep, ViolationsCloseTheConnection) {
  BrokerState st;
  SessionContext fresh{1, std::nullopt};
  auto r = broker_step(st, fresh, Pingreq{});
  EXPECT_FALSE(r.violation.empty());
  EXPECT_TRUE(r.close_sender);
  EXPECT_TRUE(r.outbound.empty());

  fresh.client_id = broker_step(st, fresh, Connect{"c", true, 0, 4}).bound_client_id;
  Publish q2;
  q2.topic = "t";
  q2.qos = 2;
  q2.packet_id = 1;
  r = broker_step(st, fresh, q2);
  EXPECT_FALSE(r.violation.empty());
  EXPECT_FALSE(broker_step(st, fresh, Connect{"c", true, 0, 4}).violation.empty());
  EXPECT_FALSE(broker_step(st, fresh, Connack{}).violation.empty());
}

TEST(BrokerStep, DuplicateConnectEvictsOlderSession) {
  BrokerState st;
  SessionContext a{1, std::nullopt};
  a.client_id = broker_step(st, a, Connect{"dev", true, 0, 4}).bound_client_id;
  broker_step(st, a, Subscribe{1, {{"x", 0}}});
  SessionContext b{2, std::nullopt};
  const auto r = broker_step(st, b, Connect{"dev", true, 0, 4});
  EXPECT_EQ(r.evicted, std::vector<SessionId>{1});
  EXPECT_EQ(st.sessions.at("dev"), 2u);
  EXPECT_TRUE(st.subscriptions.empty());
  // The evicted connection closing later must not remove the new session.
  broker_drop(st, a);
  EXPECT_EQ(st.sessions.count("dev"), 1u);
}

TEST(BrokerStep, PingAndDisconnect) {
  BrokerState st;
  SessionContext c{1, std::nullopt};
  c.client_id = broker_step(st, c, Connect{"c", true, 0, 4}).bound_client_id;
  auto r = broker_step(st, c, Pingreq{});
  ASSERT_EQ(r.outbound.size(), 1u);
  EXPECT_EQ(r.outbound[0].packet, Packet(Pingresp{}));
  r = broker_step(st, c, Disconnect{});
  EXPECT_TRUE(r.close_sender);
  EXPECT_TRUE(st.sessions.empty());
}

TEST(BrokerStep, UnsupportedProtocolLevelRefused) {
  BrokerState st;
  SessionContext c{1, std::nullopt};
  const auto r = broker_step(st, c, Connect{"c", true, 0, 5});
  ASSERT_EQ(r.outbound.size(), 1u);
  EXPECT_EQ(std::get<Connack>(r.outbound[0].packet).return_code, 1);
  EXPECT_TRUE(r.close_sender);
  EXPECT_TRUE(st.sessions.empty());
}

TEST(BrokerStep, EveryClientIdHasAtMostOneSessionUnderRandomTraffic) {
  oracle::Rng rng(1);
  BrokerState st;
  std::vector<SessionContext> conns;
  for (SessionId id = 1; id <= 400; ++id) {
    SessionContext s{id, std::nullopt};
    const std::string cid = "c" + std::to_string(rng() % 8);
    s.client_id = broker_step(st, s, Connect{cid, true, 0, 4}).bound_client_id;
    conns.push_back(s);
    if (rng() % 3 == 0) broker_drop(st, conns[rng() % conns.size()]);
    std::set<SessionId> live;
    for (const auto& [client, sid] : st.sessions) EXPECT_TRUE(live.insert(sid).second);
  }
}

class BrokerFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    broker_ = std::make_unique<BrokerServer>(net::Endpoint{"127.0.0.1", 0});
    broker_->start();
  }
  void TearDown() override { broker_->stop(); }
  net::Endpoint ep() const { return {"127.0.0.1", broker_->port()}; }

  std::unique_ptr<BrokerServer> broker_;
};

TEST_F(BrokerFixture, SubscribeThenPublishDelivers) {
  Client sub(ep(), "sub");
  Inbox inbox;
  sub.subscribe("iot/+/data", inbox.handler());
  Client pub(ep(), "pub");
  pub.publish("iot/x/data", "payload", 0);
  ASSERT_TRUE(inbox.wait_for(1));
  EXPECT_EQ(inbox.items[0], (std::pair<std::string, std::string>{"iot/x/data", "payload"}));
}

TEST_F(BrokerFixture, HundredPublishesArriveInOrder) {
  Client sub(ep(), "sub");
  Inbox inbox;
  sub.subscribe("iot/+/data", inbox.handler());
  Client pub(ep(), "pub");
  for (int i = 0; i < 100; ++i) pub.publish("iot/p/data", std::to_string(i), 0);
  ASSERT_TRUE(inbox.wait_for(100));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(inbox.items[i].second, std::to_string(i));
}

TEST_F(BrokerFixture, Qos1PublishReturnsAfterPuback) {
  Client pub(ep(), "pub");
  EXPECT_NO_THROW(pub.publish("iot/p/data", "x", 1));
  EXPECT_NO_THROW(pub.publish("iot/p/data", "y", 1));
  EXPECT_TRUE(oracle::eventually([&] { return broker_->publishes_received() == 2; }));
}

TEST_F(BrokerFixture, InvalidFilterRejectedBeforeNetwork) {
  Client c(ep(), "c");
  EXPECT_THROW(c.subscribe("a/#/b", [](const std::string&, const std::string&) {}), InvalidFilter);
}

TEST_F(BrokerFixture, FirstPacketNotConnectClosesConnection) {
  auto sock = net::tcp_connect(ep(), 1000ms);
  net::write_all(sock, encode_packet(Pingreq{}));
  EXPECT_FALSE(read_packet(sock));
}

TEST_F(BrokerFixture, DuplicateClientIdEvictsOlderConnection) {
  Client first(ep(), "dup");
  std::atomic<bool> broke{false};
  first.on_error([&](const std::string&) { broke = true; });
  Client second(ep(), "dup");
  EXPECT_TRUE(oracle::eventually([&] { return broke.load(); }));
  EXPECT_FALSE(first.connected());
  EXPECT_TRUE(second.connected());
  EXPECT_EQ(broker_->snapshot().sessions.size(), 1u);
}

TEST_F(BrokerFixture, BrokenConnectionReportedToOwner) {
  Client c(ep(), "c");
  std::atomic<bool> broke{false};
  c.on_error([&](const std::string&) { broke = true; });
  broker_->stop();
  EXPECT_TRUE(oracle::eventually([&] { return broke.load(); }));
  EXPECT_THROW(c.publish("t", "x", 0), ClientError);
}

TEST(MqttClient, ConnectionRefused) {
  net::TcpListener probe({"127.0.0.1", 0});
  const auto port = probe.port();
  probe.close();
  try {
    Client c({"127.0.0.1", port}, "c");
    FAIL();
  } catch (const ClientError& e) {
    EXPECT_EQ(e.kind(), ClientError::Kind::connection_refused);
  }
}

TEST(MqttClient, AckTimeoutAgainstSilentPeer) {
  // A listener that completes CONNACK and then swallows everything.
  net::TcpListener silent({"127.0.0.1", 0});
  std::thread peer([&] {
    auto s = silent.accept(2000ms);
    if (!s) return;
    read_packet(*s);
    net::write_all(*s, encode_packet(Connack{false, 0}));
    while (read_packet(*s)) {
    }
  });
  {
    Client c({"127.0.0.1", silent.port()}, "c", ClientOptions{1000ms, 200ms});
    try {
      c.publish("t", "x", 1);
      FAIL();
    } catch (const ClientError& e) {
      EXPECT_EQ(e.kind(), ClientError::Kind::ack_timeout);
    }
  }
  peer.join();
}
