#include <doctest.h>

#include "blunt/network.hpp"

using namespace blunt;

TEST_CASE("broadcast creates one message per destination") {
  Network net;
  auto ids = net.broadcast(1, 3, "R", MsgTag::Query, 1, Value::bot(), Timestamp{});
  CHECK(ids.size() == 3);
  CHECK(net.inFlight.size() == 3);
  bool self = false;
  for (const Message& m : net.inFlight)
    if (m.dest == 1) self = true;
  CHECK(self);  // sender-to-self included
}

TEST_CASE("same payload, distinct ids") {
  Network net;
  int a = net.send(0, 1, "R", MsgTag::Update, 2, Value::integer(1), Timestamp{1, 1}, -1);
  int b = net.send(0, 1, "R", MsgTag::Update, 2, Value::integer(1), Timestamp{1, 1}, -1);
  CHECK(a != b);
}

TEST_CASE("deliverable and take") {
  Network net;
  CHECK(net.deliverable(0).empty());
  net.broadcast(1, 3, "R", MsgTag::Query, 1, Value::bot(), Timestamp{});
  CHECK(net.deliverable(0).size() == 1);
  int id = net.deliverable(0)[0];
  Message m = net.take(id);
  CHECK(m.dest == 0);
  CHECK(net.inFlight.size() == 2);
  CHECK_THROWS_AS(net.take(id), Error);  // delivered messages leave permanently
}

TEST_CASE("conservation of messages") {
  Network net;
  net.broadcast(0, 3, "R", MsgTag::Query, 1, Value::bot(), Timestamp{});
  net.broadcast(2, 3, "R", MsgTag::Update, 1, Value::integer(5), Timestamp{1, 2});
  net.take(net.deliverable(1)[0]);
  net.take(net.deliverable(2)[0]);
  CHECK(net.sent == 6);
  CHECK(net.delivered == 2);
  CHECK(static_cast<long>(net.inFlight.size()) == net.sent - net.delivered);
}
