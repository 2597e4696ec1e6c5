#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "interceptor/bus.hpp"

using namespace interceptor;

namespace {

Envelope make(std::string topic, NodeId publisher, std::uint64_t seq, std::string payload = "") {
  return Envelope{Topic(std::move(topic)), std::move(payload), std::move(publisher), seq, 0};
}

}  // namespace

TEST(Broker, SubscribedClientReceivesPublish) {
  Broker b;
  b.subscribe("vision", Topic("/signal/process_image"));
  EXPECT_EQ(b.publish(make("/signal/process_image", "autonomous", 0)), 1u);
  b.flush();
  auto got = b.drain("vision");
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].topic.name(), "/signal/process_image");
}

TEST(Broker, SubscribeIsIdempotent) {
  Broker b;
  b.subscribe("vision", Topic("/signal/process_image"));
  b.subscribe("vision", Topic("/signal/process_image"));
  EXPECT_EQ(b.publish(make("/signal/process_image", "autonomous", 0)), 1u);
  b.flush();
  EXPECT_EQ(b.drain("vision").size(), 1u);
}

TEST(Broker, MalformedTopicRejected) {
  EXPECT_THROW(Topic("telemetry"), ProtocolError);
  EXPECT_THROW(Topic(""), ProtocolError);
  EXPECT_THROW(Topic("/tele metry"), ProtocolError);
}

TEST(Broker, LandReachesEverySubscriber) {
  Broker b;
  for (auto id : {"vision", "proxy", "broker-logger"}) b.subscribe(id, Topic("/land"));
  EXPECT_EQ(b.publish(make("/land", "autonomous", 0)), 3u);
}

TEST(Broker, NoSubscribersIsNotAnError) {
  Broker b;
  EXPECT_EQ(b.publish(make("/lock", "autonomous", 0)), 0u);
  EXPECT_EQ(b.flush().size(), 1u);
}

TEST(Broker, PerPublisherOrder) {
  Broker b;
  b.subscribe("a", Topic("/t"));
  b.subscribe("b", Topic("/t"));
  b.publish(make("/t", "p", 5));
  b.publish(make("/t", "p", 6));
  b.flush();
  for (auto id : {"a", "b"}) {
    auto got = b.drain(id);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].seq, 5u);
    EXPECT_EQ(got[1].seq, 6u);
  }
}

TEST(Broker, PublisherSeesOwnMessageWhenSubscribed) {
  Broker b;
  b.subscribe("p", Topic("/t"));
  EXPECT_EQ(b.publish(make("/t", "p", 0)), 1u);
}

TEST(Broker, ReusedSeqRejected) {
  Broker b;
  b.publish(make("/t", "p", 3));
  EXPECT_THROW(b.publish(make("/t", "p", 3)), ProtocolError);
  EXPECT_THROW(b.publish(make("/t", "p", 2)), ProtocolError);
}

TEST(Broker, UnsubscribeLifecycle) {
  Broker b;
  EXPECT_FALSE(b.unsubscribe("x", Topic("/t")));
  b.subscribe("x", Topic("/t"));
  b.subscribe("y", Topic("/t"));
  EXPECT_EQ(b.publish(make("/t", "p", 0)), 2u);
  EXPECT_TRUE(b.unsubscribe("x", Topic("/t")));
  EXPECT_FALSE(b.is_subscribed("x", Topic("/t")));
  EXPECT_EQ(b.publish(make("/t", "p", 1)), 1u);
  b.flush();
  EXPECT_EQ(b.drain("x").size(), 1u);
  EXPECT_EQ(b.drain("y").size(), 2u);
}

TEST(Broker, RejectsAfterShutdown) {
  Broker b;
  b.shutdown();
  EXPECT_THROW(b.publish(make("/t", "p", 0)), ProtocolError);
  EXPECT_THROW(b.subscribe("x", Topic("/t")), ProtocolError);
}

TEST(Broker, FlushOrdersByPublisherThenSeq) {
  Broker b;
  b.publish(make("/t", "zeta", 0));
  b.publish(make("/t", "alpha", 1));
  b.publish(make("/t", "alpha", 0 + 2));
  auto out = b.flush();
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].publisher_id, "alpha");
  EXPECT_EQ(out[1].publisher_id, "alpha");
  EXPECT_EQ(out[2].publisher_id, "zeta");
  EXPECT_LT(out[0].seq, out[1].seq);
}

TEST(Broker, SubscriberSetSnapshottedAtPublish) {
  Broker b;
  b.subscribe("x", Topic("/t"));
  b.publish(make("/t", "p", 0));
  b.unsubscribe("x", Topic("/t"));
  b.subscribe("late", Topic("/t"));
  b.flush();
  EXPECT_EQ(b.drain("x").size(), 1u);
  EXPECT_TRUE(b.drain("late").empty());
}

TEST(Publisher, StampsIncreasingSeq) {
  Broker b;
  Publisher p("p");
  b.subscribe("x", Topic("/t"));
  p.publish(b, "/t", "a", 0);
  p.publish(b, "/t", "b", 0);
  b.flush();
  auto got = b.drain("x");
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].seq + 1, got[1].seq);
  EXPECT_EQ(p.published(), 2u);
}

// Randomized interleaving against a model of who was subscribed at publish time.
TEST(BrokerProperty, RandomInterleavings) {
  std::mt19937_64 rng(1234);
  const std::vector<std::string> topic_names{"/a", "/b", "/c", "/a/b"};
  const std::vector<NodeId> clients{"c0", "c1", "c2", "c3", "c4"};
  const std::vector<NodeId> pubs{"p0", "p1", "p2"};

  Broker b;
  std::map<std::string, std::set<NodeId>> model;
  std::map<NodeId, std::uint64_t> next_seq;
  std::map<NodeId, std::multiset<std::pair<NodeId, std::uint64_t>>> expected;
  std::map<NodeId, std::vector<Envelope>> received;

  for (int op = 0; op < 5000; ++op) {
    const auto& topic = topic_names[rng() % topic_names.size()];
    const auto& client = clients[rng() % clients.size()];
    switch (rng() % 4) {
      case 0:
        b.subscribe(client, Topic(topic));
        model[topic].insert(client);
        break;
      case 1:
        EXPECT_EQ(b.unsubscribe(client, Topic(topic)), model[topic].erase(client) > 0);
        break;
      case 2: {
        const auto& pub = pubs[rng() % pubs.size()];
        const auto seq = next_seq[pub]++;
        EXPECT_EQ(b.publish(make(topic, pub, seq, topic)), model[topic].size());
        for (const auto& c : model[topic]) expected[c].insert({pub, seq});
        break;
      }
      default:
        b.flush();
        for (const auto& c : clients) {
          for (auto& e : b.drain(c)) received[c].push_back(std::move(e));
        }
    }
  }
  b.flush();
  for (const auto& c : clients) {
    for (auto& e : b.drain(c)) received[c].push_back(std::move(e));
  }

  for (const auto& c : clients) {
    std::multiset<std::pair<NodeId, std::uint64_t>> got;
    std::map<NodeId, std::uint64_t> last;
    for (const auto& e : received[c]) {
      EXPECT_EQ(e.payload, e.topic.name());
      got.insert({e.publisher_id, e.seq});
      if (auto it = last.find(e.publisher_id); it != last.end()) {
        EXPECT_LT(it->second, e.seq);
      }
      last[e.publisher_id] = e.seq;
    }
    EXPECT_EQ(got, expected[c]) << c;
    std::set<std::pair<NodeId, std::uint64_t>> unique(got.begin(), got.end());
    EXPECT_EQ(unique.size(), got.size());
  }
}
