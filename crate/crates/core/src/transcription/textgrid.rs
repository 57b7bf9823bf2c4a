//! Praat TextGrid reader and writer.
//!
//! The long text format is a sequence of `key = value` lines where only the
//! values matter to Praat's own reader, so parsing works on the stream of
//! values (quoted strings, numbers and `<flags>`) with labels and bracketed
//! indices skipped. This also accepts the short text format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TextGridError {
    #[error("line {line}: expected {expected}")]
    Syntax { line: usize, expected: String },
    #[error("could not decode file: {0}")]
    Encoding(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tier {
    pub name: String,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<Tier>,
    /// Names of point tiers that were skipped.
    pub skipped_tiers: Vec<String>,
}

impl TextGrid {
    pub fn tier(&self, name: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Str(String),
    Num(f64),
    Flag(String),
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self { chars: text.chars().peekable(), line: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn skip_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if !f(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    /// Next value token with the line it started on.
    fn next(&mut self) -> Result<Option<(Token, usize)>, TextGridError> {
        loop {
            let Some(&c) = self.chars.peek() else { return Ok(None) };
            let line = self.line;
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(TextGridError::Syntax {
                                    line: self.line,
                                    expected: "closing quote".into(),
                                })
                            }
                            Some('"') if self.chars.peek() == Some(&'"') => {
                                self.bump();
                                s.push('"');
                            }
                            Some('"') => break,
                            Some(ch) => s.push(ch),
                        }
                    }
                    return Ok(Some((Token::Str(s), line)));
                }
                '[' => {
                    self.skip_while(|c| c != ']');
                    self.bump();
                }
                '<' => {
                    self.bump();
                    let f = self.skip_while(|c| c != '>');
                    self.bump();
                    return Ok(Some((Token::Flag(f), line)));
                }
                '!' => {
                    // comment to end of line
                    self.skip_while(|c| c != '\n');
                }
                c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                    let word = self.skip_while(|c| !c.is_whitespace());
                    let v = word.parse::<f64>().map_err(|_| TextGridError::Syntax {
                        line,
                        expected: format!("number, found '{word}'"),
                    })?;
                    return Ok(Some((Token::Num(v), line)));
                }
                _ => {
                    // label text such as `xmin =` or `intervals:`
                    self.skip_while(|c| !c.is_whitespace() && c != '"' && c != '[' && c != '<');
                }
            }
        }
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
}

impl Parser<'_> {
    fn eof(&self, what: &str) -> TextGridError {
        TextGridError::Syntax { line: self.lex.line, expected: format!("{what} before end of file") }
    }

    fn string(&mut self, what: &str) -> Result<String, TextGridError> {
        match self.lex.next()? {
            Some((Token::Str(s), _)) => Ok(s),
            Some((_, line)) => Err(TextGridError::Syntax { line, expected: format!("string for {what}") }),
            None => Err(self.eof(what)),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, TextGridError> {
        self.number_at(what).map(|(v, _)| v)
    }

    /// A number and the line it was on.
    fn number_at(&mut self, what: &str) -> Result<(f64, usize), TextGridError> {
        match self.lex.next()? {
            Some((Token::Num(v), line)) => Ok((v, line)),
            Some((_, line)) => Err(TextGridError::Syntax { line, expected: format!("number for {what}") }),
            None => Err(self.eof(what)),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, TextGridError> {
        let (v, line) = self.number_at(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(TextGridError::Syntax { line, expected: format!("non-negative integer for {what}") });
        }
        Ok(v as usize)
    }
}

/// Parses a Praat TextGrid (long or short text format).
pub fn parse_textgrid(text: &str) -> Result<TextGrid, TextGridError> {
    let mut p = Parser { lex: Lexer::new(text) };
    let file_type = p.string("file type")?;
    if !file_type.starts_with("ooTextFile") {
        return Err(TextGridError::Syntax { line: 1, expected: "\"ooTextFile\" file type".into() });
    }
    let class = p.string("object class")?;
    if class != "TextGrid" {
        return Err(TextGridError::Syntax { line: p.lex.line, expected: "object class \"TextGrid\"".into() });
    }
    let xmin = p.number("xmin")?;
    let xmax = p.number("xmax")?;
    let has_tiers = match p.lex.next()? {
        Some((Token::Flag(f), _)) => f == "exists",
        Some((_, line)) => return Err(TextGridError::Syntax { line, expected: "<exists> or <absent>".into() }),
        None => return Err(p.eof("tier flag")),
    };
    let mut grid = TextGrid { xmin, xmax, tiers: Vec::new(), skipped_tiers: Vec::new() };
    if !has_tiers {
        return Ok(grid);
    }
    let n_tiers = p.count("tier count")?;
    for _ in 0..n_tiers {
        let class_line = p.lex.line;
        let class = p.string("tier class")?;
        let name = p.string("tier name")?;
        p.number("tier xmin")?;
        p.number("tier xmax")?;
        let n = p.count("item count")?;
        match class.as_str() {
            "IntervalTier" => {
                let mut intervals = Vec::with_capacity(n);
                for _ in 0..n {
                    let (a, line) = p.number_at("interval xmin")?;
                    let b = p.number("interval xmax")?;
                    let label = p.string("interval text")?;
                    if !(a < b) {
                        return Err(TextGridError::Syntax { line, expected: format!("xmin < xmax (got {a} >= {b})") });
                    }
                    if let Some(prev) = intervals.last().map(|i: &Interval| i.xmax) {
                        if a < prev - 1e-9 {
                            return Err(TextGridError::Syntax { line, expected: "ordered, non-overlapping intervals".into() });
                        }
                    }
                    intervals.push(Interval { xmin: a, xmax: b, label });
                }
                grid.tiers.push(Tier { name, intervals });
            }
            "TextTier" => {
                log::warn!("skipping point tier {name:?}");
                for _ in 0..n {
                    p.number("point time")?;
                    p.string("point mark")?;
                }
                grid.skipped_tiers.push(name);
            }
            other => {
                return Err(TextGridError::Syntax {
                    line: class_line,
                    expected: format!("IntervalTier or TextTier, found {other:?}"),
                })
            }
        }
    }
    Ok(grid)
}

/// Decodes UTF-8 (optionally with BOM) or BOM-marked UTF-16 bytes.
pub fn decode_text(bytes: &[u8]) -> Result<String, TextGridError> {
    let utf16 = |le: bool| -> Result<String, TextGridError> {
        let units: Vec<u16> = bytes[2..]
            .chunks_exact(2)
            .map(|c| if le { u16::from_le_bytes([c[0], c[1]]) } else { u16::from_be_bytes([c[0], c[1]]) })
            .collect();
        String::from_utf16(&units).map_err(|e| TextGridError::Encoding(e.to_string()))
    };
    match bytes {
        [0xFF, 0xFE, ..] => utf16(true),
        [0xFE, 0xFF, ..] => utf16(false),
        [0xEF, 0xBB, 0xBF, rest @ ..] => {
            String::from_utf8(rest.to_vec()).map_err(|e| TextGridError::Encoding(e.to_string()))
        }
        _ => String::from_utf8(bytes.to_vec()).map_err(|e| TextGridError::Encoding(e.to_string())),
    }
}

pub fn read_textgrid(path: &Path) -> Result<TextGrid, TextGridError> {
    let bytes = fs::read(path).map_err(|e| TextGridError::Io(format!("{}: {e}", path.display())))?;
    parse_textgrid(&decode_text(&bytes)?)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Writes the long text format.
pub fn to_long_text(grid: &TextGrid) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(o, "xmin = {}\nxmax = {}", grid.xmin, grid.xmax);
    if grid.tiers.is_empty() {
        let _ = writeln!(o, "tiers? <absent>");
        return o;
    }
    let _ = writeln!(o, "tiers? <exists>\nsize = {}\nitem []:", grid.tiers.len());
    for (i, tier) in grid.tiers.iter().enumerate() {
        let _ = writeln!(o, "    item [{}]:", i + 1);
        let _ = writeln!(o, "        class = \"IntervalTier\"");
        let _ = writeln!(o, "        name = {}", quote(&tier.name));
        let _ = writeln!(o, "        xmin = {}", grid.xmin);
        let _ = writeln!(o, "        xmax = {}", grid.xmax);
        let _ = writeln!(o, "        intervals: size = {}", tier.intervals.len());
        for (j, iv) in tier.intervals.iter().enumerate() {
            let _ = writeln!(o, "        intervals [{}]:", j + 1);
            let _ = writeln!(o, "            xmin = {}", iv.xmin);
            let _ = writeln!(o, "            xmax = {}", iv.xmax);
            let _ = writeln!(o, "            text = {}", quote(&iv.label));
        }
    }
    o
}
