// Attribute schema and the token vocabulary built from it.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "distcap/common.hpp"

namespace distcap {

// Fixed scene schema: 6 categorical attributes, 8 values each. Object and
// color are mandatory in every caption; the rest are optional.
struct Schema {
  static constexpr int kAttributeCount = 6;
  static constexpr int kValuesPerAttribute = 8;
  static constexpr int kTotalAttributeValues = kAttributeCount * kValuesPerAttribute;

  enum Attribute { kObject = 0, kColor = 1, kSize = 2, kBackground = 3, kPosition = 4, kCount = 5 };

  static const char* attribute_name(int attribute);
  static const char* value_word(int attribute, int value);
};

// Token ids: 0 = BOS, 1 = EOS, then the 48 attribute-value words in
// (attribute, value) order, then the function words used by the templates.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;

  Vocabulary();

  int size() const { return static_cast<int>(words_.size()); }
  TokenId attribute_token(int attribute, int value) const;
  TokenId function_token(const std::string& word) const;
  const std::string& word(TokenId id) const;
  bool is_attribute_token(TokenId id) const;

  // Attribute/value pair for an attribute-word token.
  std::pair<int, int> attribute_of(TokenId id) const;

  static const Vocabulary& instance();

 private:
  std::vector<std::string> words_;
};

}  // namespace distcap
