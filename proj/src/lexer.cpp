#include "astral/lexer.hpp"

#include <cctype>
#include <unordered_map>

namespace astral {

namespace {

const std::unordered_map<std::string, Kw>& keyword_table() {
  static const std::unordered_map<std::string, Kw> t = {
      {"GLOBAL", Kw::Global}, {"SPECIFICATION", Kw::Specification},
      {"PROCESS", Kw::Process}, {"PROCESSES", Kw::Processes},
      {"LEVEL", Kw::Level}, {"TYPE", Kw::Type}, {"CONSTANT", Kw::Constant},
      {"VARIABLE", Kw::Variable}, {"EXPORT", Kw::Export}, {"IMPORT", Kw::Import},
      {"INITIAL", Kw::Initial}, {"AXIOM", Kw::Axiom}, {"INVARIANT", Kw::Invariant},
      {"TRANSITION", Kw::Transition}, {"ENTRY", Kw::Entry}, {"EXIT", Kw::Exit},
      {"TIME", Kw::Time}, {"TYPEDEF", Kw::Typedef}, {"STRUCTURE", Kw::Structure},
      {"OF", Kw::Of}, {"LIST", Kw::List}, {"SET", Kw::Set}, {"SETDEF", Kw::Setdef},
      {"LISTDEF", Kw::Listdef}, {"STRUCTDEF", Kw::Structdef},
      {"CONTAINED_IN", Kw::ContainedIn}, {"SET_DIFF", Kw::SetDiff},
      {"UNION", Kw::Union}, {"ISIN", Kw::Isin}, {"SUBSET", Kw::Subset},
      {"CONCAT", Kw::Concat}, {"MOD", Kw::Mod}, {"BECOMES", Kw::Becomes},
      {"NOCHANGE", Kw::Nochange}, {"IF", Kw::If}, {"THEN", Kw::Then},
      {"ELSE", Kw::Else}, {"FI", Kw::Fi}, {"CASE", Kw::Case}, {"ESAC", Kw::Esac},
      {"FORALL", Kw::Forall}, {"EXISTS", Kw::Exists}, {"CHOOSE", Kw::Choose},
      {"PAST", Kw::Past}, {"NOW", Kw::Now}, {"START", Kw::Start}, {"END", Kw::End},
      {"CALL", Kw::Call}, {"CHANGE", Kw::Change}, {"TRUE", Kw::True_},
      {"FALSE", Kw::False_}, {"SET_SIZE", Kw::SetSize}, {"LIST_LEN", Kw::ListLen},
      {"IMPLEMENTATION", Kw::Implementation}, {"IMPL", Kw::Impl},
      {"IMPL_0", Kw::Impl0}, {"WHEN", Kw::When}, {"DO", Kw::Do},
      {"BEFORE", Kw::Before}, {"OD", Kw::Od}, {"AT", Kw::At},
      {"INTEGER", Kw::Integer}, {"REAL", Kw::Real}, {"BOOLEAN", Kw::Boolean},
      {"ID", Kw::Id},
  };
  return t;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

const char* kw_spelling(Kw k) {
  for (const auto& [name, kw] : keyword_table())
    if (kw == k) return name.c_str();
  return "?";
}

const char* punct_spelling(Punct p) {
  switch (p) {
    case Punct::LParen: return "(";
    case Punct::RParen: return ")";
    case Punct::LBracket: return "[";
    case Punct::RBracket: return "]";
    case Punct::LBrace: return "{";
    case Punct::RBrace: return "}";
    case Punct::Comma: return ",";
    case Punct::Colon: return ":";
    case Punct::Dot: return ".";
    case Punct::Prime: return "'";
    case Punct::EqEq: return "==";
    case Punct::Eq: return "=";
    case Punct::Neq: return "~=";
    case Punct::TildeNot: return "~";
    case Punct::Lt: return "<";
    case Punct::Le: return "<=";
    case Punct::Gt: return ">";
    case Punct::Ge: return ">=";
    case Punct::Plus: return "+";
    case Punct::Minus: return "-";
    case Punct::Star: return "*";
    case Punct::Slash: return "/";
    case Punct::Amp: return "&";
    case Punct::Pipe: return "|";
    case Punct::Arrow: return "->";
    case Punct::Iff: return "<->";
  }
  return "?";
}

std::vector<Token> lex(std::string_view text, const std::string& file) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;

  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (i < text.size() && text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto push = [&](Token t, SourceLoc loc) {
    t.loc = loc;
    out.push_back(std::move(t));
  };
  auto punct = [&](Punct p, size_t n, SourceLoc loc) {
    Token t;
    t.tok = Tok::Punct;
    t.punct = p;
    t.text = std::string(text.substr(i, n));
    advance(n);
    push(std::move(t), loc);
  };

  while (i < text.size()) {
    char c = text[i];
    SourceLoc loc{line, col};
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    // -- comments: rest of line after "--"
    if (c == '-' && i + 1 < text.size() && text[i + 1] == '-') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (ident_start(c)) {
      size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      std::string word(text.substr(i, j - i));
      std::string upper = word;
      for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      Token t;
      auto it = keyword_table().find(upper);
      if (it != keyword_table().end()) {
        t.tok = Tok::Kw;
        t.kw = it->second;
      } else {
        t.tok = Tok::Ident;
        t.ident = intern(word);
      }
      t.text = word;
      advance(j - i);
      push(std::move(t), loc);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      Token t;
      t.tok = Tok::Int;
      t.text = std::string(text.substr(i, j - i));
      try {
        t.ival = std::stoll(t.text);
      } catch (const std::exception&) {
        throw AstralError("integer literal out of range: " + t.text, loc);
      }
      advance(j - i);
      push(std::move(t), loc);
      continue;
    }
    auto two = [&](char a, char b) {
      return c == a && i + 1 < text.size() && text[i + 1] == b;
    };
    if (two('=', '=')) { punct(Punct::EqEq, 2, loc); continue; }
    if (two('~', '=')) { punct(Punct::Neq, 2, loc); continue; }
    if (two('<', '=')) { punct(Punct::Le, 2, loc); continue; }
    if (two('>', '=')) { punct(Punct::Ge, 2, loc); continue; }
    if (two('-', '>')) { punct(Punct::Arrow, 2, loc); continue; }
    if (c == '<' && i + 2 < text.size() && text[i + 1] == '-' && text[i + 2] == '>') {
      punct(Punct::Iff, 3, loc);
      continue;
    }
    // Unicode aliases used by the paper's typesetting.
    auto starts = [&](const char* u) {
      std::string_view rest = text.substr(i);
      return rest.rfind(u, 0) == 0;
    };
    if (starts("→")) { punct(Punct::Arrow, 3, loc); continue; }   // ->
    if (starts("↔")) { punct(Punct::Iff, 3, loc); continue; }     // <->
    if (starts("≠")) { punct(Punct::Neq, 3, loc); continue; }     // ~=
    if (starts("≤")) { punct(Punct::Le, 3, loc); continue; }      // <=
    if (starts("≥")) { punct(Punct::Ge, 3, loc); continue; }      // >=
    switch (c) {
      case '(': punct(Punct::LParen, 1, loc); continue;
      case ')': punct(Punct::RParen, 1, loc); continue;
      case '[': punct(Punct::LBracket, 1, loc); continue;
      case ']': punct(Punct::RBracket, 1, loc); continue;
      case '{': punct(Punct::LBrace, 1, loc); continue;
      case '}': punct(Punct::RBrace, 1, loc); continue;
      case ',': punct(Punct::Comma, 1, loc); continue;
      case ':': punct(Punct::Colon, 1, loc); continue;
      case '.': punct(Punct::Dot, 1, loc); continue;
      case '\'': punct(Punct::Prime, 1, loc); continue;
      case '=': punct(Punct::Eq, 1, loc); continue;
      case '~': punct(Punct::TildeNot, 1, loc); continue;
      case '<': punct(Punct::Lt, 1, loc); continue;
      case '>': punct(Punct::Gt, 1, loc); continue;
      case '+': punct(Punct::Plus, 1, loc); continue;
      case '-': punct(Punct::Minus, 1, loc); continue;
      case '*': punct(Punct::Star, 1, loc); continue;
      case '/': punct(Punct::Slash, 1, loc); continue;
      case '&': punct(Punct::Amp, 1, loc); continue;
      case '|': punct(Punct::Pipe, 1, loc); continue;
      default: break;
    }
    throw AstralError(std::string("unexpected character '") + c + "' in " +
                          (file.empty() ? "<input>" : file),
                      loc);
  }
  Token eof;
  eof.tok = Tok::Eof;
  eof.loc = {line, col};
  out.push_back(std::move(eof));
  return out;
}

}  // namespace astral
