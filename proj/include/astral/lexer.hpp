// Tokenizer for specification, mapping and schedule files. Keywords are
// case-insensitive; identifiers are case-sensitive.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "astral/basics.hpp"

namespace astral {

enum class Tok {
  Ident,
  Int,
  Kw,      // keyword; which one is in `kw`
  Punct,   // which one is in `punct`
  Eof,
};

enum class Kw {
  Global, Specification, Process, Processes, Level, Type, Constant, Variable,
  Export, Import, Initial, Axiom, Invariant, Transition, Entry, Exit, Time,
  Typedef, Structure, Of, List, Set, Setdef, Listdef, Structdef, ContainedIn,
  SetDiff, Union, Isin, Subset, Concat, Mod, Becomes, Nochange, If, Then,
  Else, Fi, Case, Esac, Forall, Exists, Choose, Past, Now, Start, End, Call,
  Change, True_, False_, SetSize, ListLen, Implementation, Impl, Impl0, When,
  Do, Before, Od, At, Integer, Real, Boolean, Id,
};

enum class Punct {
  LParen, RParen, LBracket, RBracket, LBrace, RBrace, Comma, Colon, Dot,
  Prime, EqEq, Eq, Neq, TildeNot, Lt, Le, Gt, Ge, Plus, Minus, Star, Slash,
  Amp, Pipe, Arrow, Iff,
};

struct Token {
  Tok tok = Tok::Eof;
  Kw kw = Kw::Global;
  Punct punct = Punct::LParen;
  Sym ident = 0;
  int64_t ival = 0;
  SourceLoc loc;
  std::string text;  // original spelling, for error messages
};

// Throws AstralError on malformed input (bad characters, overflow).
std::vector<Token> lex(std::string_view text, const std::string& file = "");

const char* kw_spelling(Kw k);
const char* punct_spelling(Punct p);

}  // namespace astral
