#include "fixtures.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace nluaug::testkit {

namespace {

struct Intent {
  std::string name;
  std::vector<std::string> templates;
};

const std::map<std::string, std::vector<Intent>>& grammar() {
  static const std::map<std::string, std::vector<Intent>> g{
      {"alarm",
       {{"set_alarm",
         {"set an alarm for {datetime}", "wake me up at {datetime}", "set alarm {datetime}",
          "i need an alarm at {datetime}", "alarm for {datetime} please", "please set my alarm for {datetime}",
          "make an alarm {datetime}"}},
        {"cancel_alarm",
         {"cancel my alarm", "cancel the alarm for {datetime}", "delete my {datetime} alarm",
          "turn off the alarm", "remove all alarms", "stop my alarm for {datetime}"}},
        {"show_alarms",
         {"show my alarms", "what alarms do i have", "list alarms for {datetime}",
          "do i have an alarm set for {datetime}", "check my alarms"}},
        {"snooze_alarm", {"snooze", "snooze the alarm", "snooze alarm for {datetime}", "snooze it"}}}},
      {"reminder",
       {{"set_reminder",
         {"remind me to {todo} {datetime}", "set a reminder to {todo}", "remind me {datetime} to {todo}",
          "create a reminder to {todo}", "i need a reminder to {todo} {datetime}", "remind me to {todo}"}},
        {"cancel_reminder",
         {"cancel my reminder to {todo}", "delete the reminder", "remove reminder for {datetime}",
          "cancel all reminders", "delete my reminder to {todo}"}},
        {"show_reminders",
         {"show my reminders", "what are my reminders for {datetime}", "list reminders",
          "do i have any reminders {datetime}", "show reminders about {todo}"}}}},
      {"weather",
       {{"find",
         {"what is the weather in {location}", "weather {datetime}", "will it {weather_attribute} {datetime}",
          "is it going to be {weather_attribute} in {location}", "how is the weather {datetime}",
          "forecast for {location} {datetime}", "weather in {location}"}},
        {"checksunrise", {"when is sunrise {datetime}", "what time is sunrise in {location}", "sunrise time"}},
        {"checksunset", {"when is sunset {datetime}", "sunset time in {location}", "what time is sunset"}}}},
  };
  return g;
}

const std::map<std::string, std::vector<std::string>>& values() {
  static const std::map<std::string, std::vector<std::string>> v{
      {"datetime",
       {"tomorrow", "7 am", "tonight", "6 am", "8:30 am", "noon", "tomorrow morning", "5 pm", "monday",
        "this weekend", "in 20 minutes", "next week"}},
      {"todo",
       {"call mom", "buy milk", "pay rent", "take my medicine", "pick up the kids", "water the plants",
        "send the report", "walk the dog"}},
      {"location", {"paris", "london", "new york", "seattle", "chicago", "tokyo", "boston", "miami"}},
      {"weather_attribute", {"rain", "snow", "sunny", "cold", "windy", "hot"}},
  };
  return v;
}

std::size_t zipf(std::size_t n, double exponent, Rng& rng) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
  return rng.categorical(w);
}

AnnotatedUtterance draw(const std::string& domain, Rng& rng) {
  const auto& intents = grammar().at(domain);
  const auto& intent = intents[zipf(intents.size(), 1.0, rng)];
  const auto& tmpl = intent.templates[zipf(intent.templates.size(), 1.2, rng)];
  AnnotatedUtterance u;
  u.domain = domain;
  u.intent = intent.name;
  std::istringstream words(tmpl);
  std::string w;
  while (words >> w) {
    if (w.front() == '{') {
      const std::string slot = w.substr(1, w.size() - 2);
      const auto& choices = values().at(slot);
      std::istringstream value(choices[zipf(choices.size(), 1.1, rng)]);
      const std::size_t start = u.tokens.size();
      std::string t;
      while (value >> t) u.tokens.push_back(t);
      u.slots.push_back({start, u.tokens.size() - 1, slot});
    } else {
      u.tokens.push_back(w);
    }
  }
  return u;
}

}  // namespace

SyntheticCorpus syntheticNluCorpus(std::size_t trainPerDomain, std::size_t testPerDomain, Rng& rng,
                                   const std::vector<std::string>& domains) {
  SyntheticCorpus c;
  for (const auto& d : domains) {
    Rng dr = rng.split(d);
    for (std::size_t i = 0; i < trainPerDomain; ++i) c.train.push_back(draw(d, dr));
    for (std::size_t i = 0; i < testPerDomain; ++i) c.test.push_back(draw(d, dr));
  }
  return c;
}

std::vector<AnnotatedUtterance> parseAll(const std::vector<std::string>& lines) {
  std::vector<AnnotatedUtterance> out;
  for (const auto& l : lines) out.push_back(parseAnnotatedString(l));
  return out;
}

}  // namespace nluaug::testkit
