#include <gtest/gtest.h>

#include <atomic>

#include "hetbridge/coap/client.hpp"
#include "hetbridge/coap/codec.hpp"
#include "hetbridge/coap/server.hpp"
#include "support/oracles.hpp"

using namespace hetbridge;
using namespace hetbridge::coap;
using namespace std::chrono_literals;

namespace {

Bytes bytes_of(std::string_view s) { return Bytes(s.begin(), s.end()); }

CodecError::Kind decode_error(const Bytes& b) {
  try {
    decode_coap(b);
  } catch (const CodecError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decoded without error";
  return CodecError::Kind::invariant_violation;
}

Message request(MessageType type, Code code, std::string_view path, std::string payload = {}) {
  Message m;
  m.type = type;
  m.code = code;
  m.set_uri_path(path);
  m.payload = std::move(payload);
  return m;
}

}  // namespace

TEST(CoapCodec, HandEncodedExamples) {
  Message get;
  get.type = MessageType::con;
  get.code = codes::get;
  get.message_id = 0x1234;
  EXPECT_EQ(encode_coap(get), (Bytes{0x40, 0x01, 0x12, 0x34}));

  Message post = request(MessageType::non, codes::post, "ingest", "x");
  post.message_id = 1;
  Bytes expected{0x50, 0x02, 0x00, 0x01, 0xB6};
  for (char c : std::string("ingest")) expected.push_back(static_cast<std::uint8_t>(c));
  expected.push_back(0xFF);
  expected.push_back('x');
  EXPECT_EQ(encode_coap(post), expected);

  Message ack;
  ack.type = MessageType::ack;
  ack.code = codes::content;
  ack.message_id = 0x1234;
  const Bytes wire = encode_coap(ack);
  EXPECT_EQ(wire[0], 0x60);
  EXPECT_EQ(wire[1], 0x45);
  EXPECT_EQ(codes::content.to_string(), "2.05");
  EXPECT_EQ(codes::service_unavailable.to_string(), "5.03");
}

TEST(CoapCodec, ExtendedDeltaAndLengthNibbles) {
  Message m;
  m.options = {{13, "a"}, {13 + 269, std::string(13, 'b')}, {13 + 269 + 300, std::string(269, 'c')}};
  const Bytes wire = encode_coap(m);
  // delta 13 -> nibble 13, ext byte 0; length 1.
  EXPECT_EQ(wire[4], 0xD1);
  EXPECT_EQ(wire[5], 0x00);
  // delta 269 -> nibble 14, ext 0x0000; length 13 -> nibble 13, ext 0.
  EXPECT_EQ(wire[7], 0xED);
  EXPECT_EQ(wire[8], 0x00);
  EXPECT_EQ(wire[9], 0x00);
  EXPECT_EQ(wire[10], 0x00);
  EXPECT_EQ(decode_coap(wire), m);
}

TEST(CoapCodec, DecodeExamplesAndErrors) {
  const Message m = decode_coap(Bytes{0x40, 0x01, 0x12, 0x34});
  EXPECT_EQ(m.type, MessageType::con);
  EXPECT_EQ(m.code, codes::get);
  EXPECT_EQ(m.message_id, 0x1234);
  EXPECT_EQ(decode_error({0x80, 0x01, 0x00, 0x00}), CodecError::Kind::bad_version);
  EXPECT_EQ(decode_error({0x40, 0x01, 0x00}), CodecError::Kind::truncated);
  EXPECT_EQ(decode_error({0x49, 0x01, 0x00, 0x00}), CodecError::Kind::bad_token_length);
  EXPECT_EQ(decode_error({0x42, 0x01, 0x00, 0x00, 0xAA}), CodecError::Kind::truncated);
  EXPECT_EQ(decode_error({0x40, 0x01, 0x00, 0x00, 0xF1, 'x'}), CodecError::Kind::malformed_option);
  EXPECT_EQ(decode_error({0x40, 0x01, 0x00, 0x00, 0x1F}), CodecError::Kind::malformed_option);
  EXPECT_EQ(decode_error({0x40, 0x01, 0x00, 0x00, 0xB3, 'a'}), CodecError::Kind::truncated);
  EXPECT_EQ(decode_error({0x40, 0x01, 0x00, 0x00, 0xFF}), CodecError::Kind::truncated);
}

TEST(CoapCodec, EncodeInvariants) {
  Message m;
  m.token = Bytes(9, 1);
  EXPECT_THROW(encode_coap(m), CodecError);
  m.token.clear();
  m.options = {{12, "a"}, {11, "b"}};
  EXPECT_THROW(encode_coap(m), CodecError);
}

TEST(CoapCodec, RoundTripProperty) {
  oracle::Rng rng(7252);
  for (int i = 0; i < 3000; ++i) {
    const Message m = oracle::random_coap(rng);
    ASSERT_EQ(decode_coap(encode_coap(m)), m) << "iteration " << i;
  }
}

TEST(CoapMessage, OptionHelpers) {
  Message m;
  m.add_uri_query("limit=1");
  m.set_uri_path("a/b");
  m.add_option(Option::uint(options::content_format, kContentFormatJson));
  m.add_uri_query("protocol=mqtt");
  EXPECT_EQ(m.uri_path(), "a/b");
  EXPECT_EQ(m.uri_queries(), (std::vector<std::string>{"limit=1", "protocol=mqtt"}));
  EXPECT_EQ(m.content_format(), kContentFormatJson);
  for (std::size_t i = 1; i < m.options.size(); ++i) EXPECT_LE(m.options[i - 1].number, m.options[i].number);
  EXPECT_EQ(Option::uint(1, 0).value, "");
  EXPECT_EQ(Option::uint(1, 50).as_uint(), 50u);
  EXPECT_EQ(Option::uint(1, 0x1234).value.size(), 2u);
}

TEST(CoapDispatch, ConGetKnownPathIsPiggybacked) {
  ResourceMap res{{"readings", [](const Message&) { return Response{codes::content, "[]", kContentFormatJson}; }}};
  Message req = request(MessageType::con, codes::get, "readings");
  req.message_id = 77;
  req.token = {1, 2, 3};
  const Message r = coap_server_dispatch(req, res, 999);
  EXPECT_EQ(r.type, MessageType::ack);
  EXPECT_EQ(r.message_id, 77);
  EXPECT_EQ(r.token, req.token);
  EXPECT_EQ(r.code, codes::content);
  EXPECT_EQ(r.payload, "[]");
  EXPECT_EQ(r.content_format(), kContentFormatJson);
}

TEST(CoapDispatch, NonUnknownPathIsNotFound) {
  Message req = request(MessageType::non, codes::post, "other");
  req.message_id = 5;
  req.token = {9};
  const Message r = coap_server_dispatch(req, {}, 1234);
  EXPECT_EQ(r.type, MessageType::non);
  EXPECT_EQ(r.message_id, 1234);
  EXPECT_EQ(r.token, req.token);
  EXPECT_EQ(r.code, codes::not_found);
}

TEST(CoapDispatch, ThrowingHandlerAnswersInternalError) {
  ResourceMap res{{"x", [](const Message&) -> Response { throw std::runtime_error("boom"); }}};
  EXPECT_EQ(coap_server_dispatch(request(MessageType::con, codes::get, "x"), res, 0).code, codes::internal_error);
}

TEST(CoapDedup, WindowAndCapacity) {
  using Clock = Deduplicator::Clock;
  const auto t0 = Clock::now();
  const net::Endpoint a{"127.0.0.1", 1000};
  Deduplicator d(60s, 3);
  Message resp;
  resp.payload = "r";
  d.remember(a, 1, resp, t0);
  EXPECT_EQ(d.lookup(a, 1, t0 + 59s), resp);
  EXPECT_FALSE(d.lookup({"127.0.0.1", 1001}, 1, t0));
  EXPECT_FALSE(d.lookup(a, 1, t0 + 61s));
  for (std::uint16_t mid = 10; mid < 14; ++mid) d.remember(a, mid, resp, t0);
  EXPECT_FALSE(d.lookup(a, 10, t0));  // oldest evicted
  EXPECT_TRUE(d.lookup(a, 13, t0));
  EXPECT_LE(d.size(), 3u);
}

class CoapServerFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    ResourceMap res;
    res["ingest"] = [this](const Message& m) {
      ++calls_;
      return Response{codes::created, m.payload, kContentFormatJson};
    };
    res["readings"] = [](const Message&) { return Response{codes::content, "[]", kContentFormatJson}; };
    server_ = std::make_unique<Server>(net::Endpoint{"127.0.0.1", 0}, std::move(res));
    server_->start();
  }
  void TearDown() override { server_->stop(); }
  net::Endpoint ep() const { return {"127.0.0.1", server_->port()}; }

  std::atomic<int> calls_{0};
  std::unique_ptr<Server> server_;
};

TEST_F(CoapServerFixture, NonPostGetsNonCreated) {
  const Message r = coap_request(ep(), request(MessageType::non, codes::post, "ingest", "rec"), false);
  EXPECT_EQ(r.type, MessageType::non);
  EXPECT_EQ(r.code, codes::created);
  EXPECT_EQ(r.payload, "rec");
}

TEST_F(CoapServerFixture, ConGetPiggybacked) {
  Message req = request(MessageType::con, codes::get, "readings");
  req.message_id = 4242;
  const Message r = coap_request(ep(), req, true);
  EXPECT_EQ(r.type, MessageType::ack);
  EXPECT_EQ(r.message_id, 4242);
  EXPECT_EQ(r.payload, "[]");
}

TEST_F(CoapServerFixture, DuplicateConRunsHandlerOnce) {
  net::UdpSocket sock;
  Message req = request(MessageType::con, codes::post, "ingest", "once");
  req.message_id = 31;
  req.token = {7, 7};
  const Bytes wire = encode_coap(req);
  sock.send_to(ep(), wire);
  auto first = sock.receive(2000ms);
  sock.send_to(ep(), wire);
  auto second = sock.receive(2000ms);
  ASSERT_TRUE(first && second);
  EXPECT_EQ(first->bytes, second->bytes);
  EXPECT_EQ(calls_.load(), 1);
}

TEST_F(CoapServerFixture, PingAnsweredWithReset) { EXPECT_TRUE(coap_ping(ep())); }

TEST_F(CoapServerFixture, ConcurrentClientsGetTheirOwnResponses) {
  std::vector<std::thread> ts;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back([&, i] {
      for (int k = 0; k < 20; ++k) {
        const std::string body = std::to_string(i) + ":" + std::to_string(k);
        const Message r = coap_request(ep(), request(MessageType::con, codes::post, "ingest", body), true);
        if (r.payload == body) ++ok;
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_EQ(ok.load(), 160);
}

TEST(CoapClient, SilentServerTimesOutAfterRetransmits) {
  net::UdpSocket silent;
  const net::Endpoint ep{"127.0.0.1", silent.port()};
  RequestOptions opts{20ms, 4, 100ms};
  const auto start = std::chrono::steady_clock::now();
  try {
    coap_request(ep, request(MessageType::con, codes::get, "readings"), true, opts);
    FAIL();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.kind(), RequestError::Kind::timeout);
  }
  // 20+40+80+160+320 ms of backoff.
  EXPECT_GE(std::chrono::steady_clock::now() - start, 600ms);
  int copies = 0;
  while (silent.receive(0ms)) ++copies;
  EXPECT_EQ(copies, 5);
}

TEST(CoapClient, WrongTokenIgnored) {
  net::UdpSocket liar;
  const net::Endpoint ep{"127.0.0.1", liar.port()};
  std::thread peer([&] {
    auto d = liar.receive(2000ms);
    if (!d) return;
    Message req = decode_coap(d->bytes);
    Message resp;
    resp.type = MessageType::non;
    resp.code = codes::content;
    resp.token = {0xDE, 0xAD};
    resp.message_id = 1;
    liar.send_to(d->from, encode_coap(resp));
  });
  Message req = request(MessageType::non, codes::get, "readings");
  req.token = {1, 2, 3, 4};
  try {
    coap_request(ep, req, false, RequestOptions{20ms, 0, 200ms});
    FAIL();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.kind(), RequestError::Kind::timeout);
  }
  peer.join();
}

TEST(CoapClient, EmptyAckThenSeparateResponse) {
  net::UdpSocket peer_sock;
  const net::Endpoint ep{"127.0.0.1", peer_sock.port()};
  std::thread peer([&] {
    auto d = peer_sock.receive(2000ms);
    if (!d) return;
    const Message req = decode_coap(d->bytes);
    Message ack;
    ack.type = MessageType::ack;
    ack.message_id = req.message_id;
    peer_sock.send_to(d->from, encode_coap(ack));
    Message sep;
    sep.type = MessageType::con;
    sep.code = codes::content;
    sep.message_id = 999;
    sep.token = req.token;
    sep.payload = "late";
    peer_sock.send_to(d->from, encode_coap(sep));
  });
  const Message r = coap_request(ep, request(MessageType::con, codes::get, "x"), true, RequestOptions{500ms, 2, 1000ms});
  EXPECT_EQ(r.payload, "late");
  peer.join();
}

TEST(CoapClient, ResetRaises) {
  net::UdpSocket peer_sock;
  const net::Endpoint ep{"127.0.0.1", peer_sock.port()};
  std::thread peer([&] {
    auto d = peer_sock.receive(2000ms);
    if (!d) return;
    Message rst;
    rst.type = MessageType::rst;
    rst.message_id = decode_coap(d->bytes).message_id;
    peer_sock.send_to(d->from, encode_coap(rst));
  });
  try {
    coap_request(ep, request(MessageType::con, codes::get, "x"), true, RequestOptions{500ms, 2, 500ms});
    FAIL();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.kind(), RequestError::Kind::reset);
  }
  peer.join();
}
