#include "rulelang_lexer.hpp"

#include <cctype>
#include <charconv>

namespace loophole::rulelang::detail {

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;

  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }

    Token tok;
    tok.span = {line, col};
    const std::size_t start = i;

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      tok.text = std::string(src.substr(i, j - i));
      if (tok.text == "_") {
        tok.kind = Tok::anonymous;
      } else if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
        tok.kind = Tok::variable;
      } else {
        tok.kind = Tok::ident;
      }
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
          j = k;
        }
      }
      tok.text = std::string(src.substr(i, j - i));
      auto [ptr, ec] = std::from_chars(src.data() + i, src.data() + j, tok.number);
      tok.kind = (ec == std::errc{} && ptr == src.data() + j) ? Tok::number : Tok::invalid;
      advance(j - i);
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != '"' && src[j] != '\n') ++j;
      if (j < src.size() && src[j] == '"') {
        tok.kind = Tok::string;
        tok.text = std::string(src.substr(i + 1, j - i - 1));
        advance(j - i + 1);
      } else {
        tok.kind = Tok::invalid;
        tok.text = "unterminated string";
        advance(j - i);
      }
    } else {
      switch (c) {
        case '(': tok.kind = Tok::lparen; break;
        case ')': tok.kind = Tok::rparen; break;
        case '{': tok.kind = Tok::lbrace; break;
        case '}': tok.kind = Tok::rbrace; break;
        case ',': tok.kind = Tok::comma; break;
        case ';': tok.kind = Tok::semicolon; break;
        case ':': tok.kind = Tok::colon; break;
        case '.': tok.kind = Tok::dot; break;
        case '=': tok.kind = Tok::eq; break;
        case '*': tok.kind = Tok::star; break;
        case '+': tok.kind = Tok::plus; break;
        case '-': tok.kind = Tok::minus; break;
        case '!':
          if (i + 1 < src.size() && src[i + 1] == '=') {
            tok.kind = Tok::neq;
            tok.text = "!=";
            advance(2);
            out.push_back(std::move(tok));
            continue;
          }
          tok.kind = Tok::invalid;
          break;
        default:
          tok.kind = Tok::invalid;
      }
      if (tok.text.empty()) {
        // keep multi-byte UTF-8 sequences together in the message
        std::size_t len = 1;
        const auto uc = static_cast<unsigned char>(c);
        if (uc >= 0xF0) len = 4;
        else if (uc >= 0xE0) len = 3;
        else if (uc >= 0xC0) len = 2;
        tok.text = std::string(src.substr(start, len));
        advance(len);
      }
    }
    out.push_back(std::move(tok));
  }

  Token end;
  end.kind = Tok::end;
  end.span = {line, col};
  out.push_back(end);
  return out;
}

std::string_view token_name(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::variable: return "variable";
    case Tok::anonymous: return "'_'";
    case Tok::number: return "number";
    case Tok::string: return "string";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::comma: return "','";
    case Tok::semicolon: return "';'";
    case Tok::colon: return "':'";
    case Tok::dot: return "'.'";
    case Tok::eq: return "'='";
    case Tok::neq: return "'!='";
    case Tok::star: return "'*'";
    case Tok::plus: return "'+'";
    case Tok::minus: return "'-'";
    case Tok::end: return "end of input";
    case Tok::invalid: return "invalid token";
  }
  return "?";
}

}  // namespace loophole::rulelang::detail
