#include "distcap/vocab.hpp"

#include <stdexcept>
#include <unordered_map>

namespace distcap {
namespace {

constexpr const char* kAttributeNames[Schema::kAttributeCount] = {
    "object", "color", "size", "background", "position", "count"};

constexpr const char* kValueWords[Schema::kAttributeCount][Schema::kValuesPerAttribute] = {
    {"cube", "sphere", "cone", "cylinder", "pyramid", "torus", "prism", "wedge"},
    {"red", "blue", "green", "yellow", "purple", "orange", "teal", "magenta"},
    {"tiny", "small", "medium", "large", "huge", "giant", "slim", "wide"},
    {"mat", "table", "floor", "grass", "sand", "carpet", "desk", "shelf"},
    {"left", "right", "center", "corner", "edge", "front", "back", "middle"},
    {"one", "two", "three", "four", "five", "six", "seven", "eight"},
};

const char* kFunctionWords[] = {"there", "is", "a",    "the",   "on", "at", "by",
                                "near",  "here", "see", "with", "group", "of"};

}  // namespace

const char* Schema::attribute_name(int attribute) {
  if (attribute < 0 || attribute >= kAttributeCount) throw std::out_of_range("attribute index");
  return kAttributeNames[attribute];
}

const char* Schema::value_word(int attribute, int value) {
  if (attribute < 0 || attribute >= kAttributeCount) throw std::out_of_range("attribute index");
  if (value < 0 || value >= kValuesPerAttribute) throw std::out_of_range("attribute value");
  return kValueWords[attribute][value];
}

Vocabulary::Vocabulary() {
  words_.reserve(2 + Schema::kTotalAttributeValues + std::size(kFunctionWords));
  words_.push_back("<bos>");
  words_.push_back("<eos>");
  for (int a = 0; a < Schema::kAttributeCount; ++a)
    for (int v = 0; v < Schema::kValuesPerAttribute; ++v) words_.push_back(kValueWords[a][v]);
  for (const char* w : kFunctionWords) words_.push_back(w);
}

TokenId Vocabulary::attribute_token(int attribute, int value) const {
  if (attribute < 0 || attribute >= Schema::kAttributeCount) throw std::out_of_range("attribute index");
  if (value < 0 || value >= Schema::kValuesPerAttribute) throw std::out_of_range("attribute value");
  return 2 + attribute * Schema::kValuesPerAttribute + value;
}

TokenId Vocabulary::function_token(const std::string& word) const {
  static const std::unordered_map<std::string, TokenId> index = [] {
    std::unordered_map<std::string, TokenId> m;
    TokenId id = 2 + Schema::kTotalAttributeValues;
    for (const char* w : kFunctionWords) m.emplace(w, id++);
    return m;
  }();
  auto it = index.find(word);
  if (it == index.end()) throw std::out_of_range("unknown function word: " + word);
  return it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id");
  return words_[id];
}

bool Vocabulary::is_attribute_token(TokenId id) const {
  return id >= 2 && id < 2 + Schema::kTotalAttributeValues;
}

std::pair<int, int> Vocabulary::attribute_of(TokenId id) const {
  if (!is_attribute_token(id)) throw std::out_of_range("not an attribute token");
  int rel = id - 2;
  return {rel / Schema::kValuesPerAttribute, rel % Schema::kValuesPerAttribute};
}

const Vocabulary& Vocabulary::instance() {
  static const Vocabulary v;
  return v;
}

}  // namespace distcap
