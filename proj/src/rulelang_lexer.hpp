#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "loophole/rulelang.hpp"

namespace loophole::rulelang::detail {

enum class Tok {
  ident,      // lowercase-initial identifier
  variable,   // uppercase-initial identifier or _Name
  anonymous,  // _
  number,
  string,
  lparen,
  rparen,
  lbrace,
  rbrace,
  comma,
  semicolon,
  colon,
  dot,
  eq,
  neq,
  star,
  plus,
  minus,
  end,
  invalid,
};

struct Token {
  Tok kind = Tok::end;
  std::string text;
  double number = 0.0;
  Span span;
};

// Never throws; malformed input yields Tok::invalid tokens with the
// offending text.
std::vector<Token> tokenize(std::string_view source);

std::string_view token_name(Tok t);

}  // namespace loophole::rulelang::detail
