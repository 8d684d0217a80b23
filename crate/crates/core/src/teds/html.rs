//! Structure-only parser for HTML table fragments.
//!
//! Only `table`, `thead`, `tbody`, `tr` and `td` survive; `th` is read as
//! `td`. Text is discarded, and every tag nested inside a cell is dropped.

use crate::error::{Error, Result};

use super::tree::{NodeLabel, TableTree, Tag};

pub fn parse_table_html(seq: &str) -> Result<TableTree> {
    Parser::new(seq).run()
}

struct OpenElement {
    node: usize,
    tag: Tag,
    /// `th` cells must be closed by `</th>`.
    closing_name: &'static str,
    offset: usize,
}

struct RawTag<'a> {
    name: String,
    closing: bool,
    self_closing: bool,
    attrs: Vec<(String, &'a str, usize)>,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tree: Option<TableTree>,
    stack: Vec<OpenElement>,
    finished: bool,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        message: message.into(),
    })
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            tree: None,
            stack: Vec::new(),
            finished: false,
        }
    }

    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn run(mut self) -> Result<TableTree> {
        while self.pos < self.src.len() {
            if self.src[self.pos..].starts_with("<!--") {
                match self.src[self.pos + 4..].find("-->") {
                    Some(end) => self.pos += 4 + end + 3,
                    None => return err(self.pos, "unterminated comment"),
                }
            } else if self.bytes()[self.pos] == b'<' {
                let start = self.pos;
                let tag = self.read_tag()?;
                self.handle(tag, start)?;
            } else {
                let start = self.pos;
                let next = self.src[self.pos..].find('<').map_or(self.src.len(), |i| self.pos + i);
                let text = &self.src[start..next];
                if !self.in_cell() && !text.trim().is_empty() && (self.tree.is_none() || self.finished) {
                    return err(start, "text outside the table element");
                }
                self.pos = next;
            }
        }
        if let Some(open) = self.stack.last() {
            return err(self.src.len(), format!("unclosed <{}> opened at byte {}", open.tag, open.offset));
        }
        self.tree.ok_or(Error::Parse {
            offset: self.src.len(),
            message: "no table element".into(),
        })
    }

    fn in_cell(&self) -> bool {
        self.stack.last().is_some_and(|e| e.tag == Tag::Td)
    }

    fn read_tag(&mut self) -> Result<RawTag<'a>> {
        let src = self.src;
        let bytes = self.bytes();
        let start = self.pos;
        let mut i = start + 1;
        let closing = bytes.get(i) == Some(&b'/');
        if closing {
            i += 1;
        }
        let name_start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
            i += 1;
        }
        if i == name_start {
            return err(start, "malformed tag");
        }
        let name = src[name_start..i].to_ascii_lowercase();
        let mut attrs = Vec::new();
        let mut self_closing = false;
        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            match bytes.get(i) {
                None => return err(start, format!("unterminated <{name}> tag")),
                Some(b'>') => {
                    i += 1;
                    break;
                }
                Some(b'/') if bytes.get(i + 1) == Some(&b'>') => {
                    self_closing = true;
                    i += 2;
                    break;
                }
                Some(_) => {}
            }
            let attr_start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'=' | b'>' | b'/') {
                i += 1;
            }
            if i == attr_start {
                return err(i, "malformed attribute");
            }
            let attr_name = src[attr_start..i].to_ascii_lowercase();
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            let mut value = "";
            if bytes.get(i) == Some(&b'=') {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                match bytes.get(i) {
                    Some(&q @ (b'"' | b'\'')) => {
                        let vstart = i + 1;
                        match bytes[vstart..].iter().position(|&b| b == q) {
                            Some(len) => {
                                value = &src[vstart..vstart + len];
                                i = vstart + len + 1;
                            }
                            None => return err(attr_start, "unterminated attribute value"),
                        }
                    }
                    _ => {
                        let vstart = i;
                        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                            i += 1;
                        }
                        value = &src[vstart..i];
                    }
                }
            }
            attrs.push((attr_name, value, attr_start));
        }
        self.pos = i;
        Ok(RawTag {
            name,
            closing,
            self_closing,
            attrs,
        })
    }

    fn handle(&mut self, tag: RawTag<'a>, offset: usize) -> Result<()> {
        if self.in_cell() {
            let open = self.stack.last().expect("in cell");
            if tag.closing && tag.name == open.closing_name {
                self.stack.pop();
            }
            return Ok(());
        }
        if tag.closing {
            return self.close(&tag.name, offset);
        }
        let kind = match tag.name.as_str() {
            "table" => Tag::Table,
            "thead" => Tag::Thead,
            "tbody" => Tag::Tbody,
            "tr" => Tag::Tr,
            "td" | "th" => Tag::Td,
            other => return err(offset, format!("unexpected <{other}> outside a cell")),
        };
        let parent = self.stack.last().map(|e| e.tag);
        let allowed = match kind {
            Tag::Table => parent.is_none() && self.tree.is_none(),
            Tag::Thead | Tag::Tbody => parent == Some(Tag::Table),
            Tag::Tr => matches!(parent, Some(Tag::Thead | Tag::Tbody)),
            Tag::Td => parent == Some(Tag::Tr),
        };
        if !allowed {
            let place = parent.map_or("top level".to_string(), |p| format!("<{p}>"));
            return err(offset, format!("<{}> not allowed inside {place}", tag.name));
        }

        let mut label = NodeLabel::tag(kind);
        if kind == Tag::Td {
            for (name, value, at) in &tag.attrs {
                match name.as_str() {
                    "colspan" => label.colspan = parse_span(value, *at)?,
                    "rowspan" => label.rowspan = parse_span(value, *at)?,
                    _ => {}
                }
            }
        }
        let node = match (&mut self.tree, self.stack.last()) {
            (None, _) => {
                self.tree = Some(TableTree::new(label));
                0
            }
            (Some(tree), Some(parent)) => tree.add_child(parent.node, label),
            (Some(_), None) => return err(offset, "content after the table element"),
        };
        if tag.self_closing {
            if kind == Tag::Table {
                self.finished = true;
            }
            return Ok(());
        }
        self.stack.push(OpenElement {
            node,
            tag: kind,
            closing_name: if tag.name == "th" { "th" } else { kind.as_str() },
            offset,
        });
        Ok(())
    }

    fn close(&mut self, name: &str, offset: usize) -> Result<()> {
        match self.stack.last() {
            Some(open) if open.closing_name == name => {
                self.stack.pop();
                if self.stack.is_empty() {
                    self.finished = true;
                }
                Ok(())
            }
            Some(open) => err(
                offset,
                format!("</{name}> does not close <{}> opened at byte {}", open.closing_name, open.offset),
            ),
            None => err(offset, format!("</{name}> without matching open tag")),
        }
    }
}

fn parse_span(value: &str, offset: usize) -> Result<u32> {
    match value.trim().parse::<u32>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => err(offset, format!("span value {value:?} is not an integer >= 1")),
    }
}
