#pragma once

#include <string>
#include <vector>

#include "blunt/errors.hpp"
#include "blunt/execution.hpp"
#include "blunt/value.hpp"

namespace blunt {

/// Reliable but fully reorderable message substrate. The substrate never
/// loses or duplicates; only delivery order is adversary-controlled.
struct Message {
  int id = -1;
  int sender = -1;
  int dest = -1;
  std::string object;
  MsgTag tag = MsgTag::Query;
  int sn = -1;
  Value val;
  Timestamp ts;
  int re = -1;  // id of the message this one answers, -1 for client phases
};

struct Network {
  std::vector<Message> inFlight;
  int nextId = 0;
  long sent = 0;
  long delivered = 0;

  int send(int sender, int dest, const std::string& object, MsgTag tag, int sn, Value val,
           Timestamp ts, int re) {
    Message m;
    m.id = nextId++;
    m.sender = sender;
    m.dest = dest;
    m.object = object;
    m.tag = tag;
    m.sn = sn;
    m.val = std::move(val);
    m.ts = ts;
    m.re = re;
    inFlight.push_back(std::move(m));
    ++sent;
    return inFlight.back().id;
  }

  /// One message per destination, sender-to-self included.
  std::vector<int> broadcast(int sender, int n, const std::string& object, MsgTag tag, int sn,
                             const Value& val, Timestamp ts) {
    std::vector<int> ids;
    for (int d = 0; d < n; ++d) ids.push_back(send(sender, d, object, tag, sn, val, ts, -1));
    return ids;
  }

  std::vector<int> deliverable(int dest) const {
    std::vector<int> ids;
    for (const Message& m : inFlight)
      if (m.dest == dest) ids.push_back(m.id);
    return ids;
  }

  const Message* find(int id) const {
    for (const Message& m : inFlight)
      if (m.id == id) return &m;
    return nullptr;
  }

  Message take(int id) {
    for (size_t i = 0; i < inFlight.size(); ++i) {
      if (inFlight[i].id == id) {
        Message m = inFlight[i];
        inFlight.erase(inFlight.begin() + i);
        ++delivered;
        return m;
      }
    }
    fail(Err::NotDeliverable, "message " + std::to_string(id) + " is not in flight");
  }
};

}  // namespace blunt
