//! Architecture description language.
//!
//! ```text
//! arch   := layer ("|" layer)*
//! layer  := "td(" ctx ")x" H
//!         | "ctd(" ctx ("," ctx)* ")x" H
//!         | "ctd(" ctx ")*" N "x" H
//!         | "sp" | "sc" | "fc(" N ")" | "fc(@classes)" | "softmax"
//! ctx    := L ":" R          (L <= 0 <= R)
//! ```
//!
//! Whitespace is allowed between tokens. Two presets stand in for the
//! published TDNN and CTDNN columns: `tdnn-paper` and `ctdnn-paper`.

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::ContextWindow;

pub const TDNN_PRESET: &str = "tdnn-paper";
pub const CTDNN_PRESET: &str = "ctdnn-paper";
/// Hidden width used when a preset is requested without one.
pub const PAPER_WIDTH: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FcWidth {
    Fixed(usize),
    /// Resolved to the number of classes when the config is built.
    Classes,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Td {
        context: ContextWindow,
        width: usize,
    },
    /// With `replicate = Some(n)`, `contexts` holds one window repeated
    /// over `n` units.
    Ctd {
        contexts: Vec<ContextWindow>,
        replicate: Option<usize>,
        width: usize,
    },
    Sp,
    Sc,
    Fc(FcWidth),
    Softmax,
}

impl LayerSpec {
    /// Context windows of every unit in this layer, in unit order.
    pub fn unit_contexts(&self) -> Vec<ContextWindow> {
        match self {
            LayerSpec::Td { context, .. } => vec![*context],
            LayerSpec::Ctd {
                contexts,
                replicate: Some(n),
                ..
            } => vec![contexts[0]; *n],
            LayerSpec::Ctd { contexts, .. } => contexts.clone(),
            _ => Vec::new(),
        }
    }

    pub fn is_time_delay(&self) -> bool {
        matches!(self, LayerSpec::Td { .. } | LayerSpec::Ctd { .. })
    }

    pub fn is_pooling(&self) -> bool {
        matches!(self, LayerSpec::Sp | LayerSpec::Sc)
    }

    fn name(&self) -> &'static str {
        match self {
            LayerSpec::Td { .. } => "td",
            LayerSpec::Ctd { .. } => "ctd",
            LayerSpec::Sp => "sp",
            LayerSpec::Sc => "sc",
            LayerSpec::Fc(_) => "fc",
            LayerSpec::Softmax => "softmax",
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Td { context, width } => write!(f, "td({context})x{width}"),
            LayerSpec::Ctd {
                contexts,
                replicate,
                width,
            } => {
                let ctxs: Vec<String> = contexts.iter().map(ToString::to_string).collect();
                write!(f, "ctd({})", ctxs.join(","))?;
                if let Some(n) = replicate {
                    write!(f, "*{n}")?;
                }
                write!(f, "x{width}")
            }
            LayerSpec::Sp => f.write_str("sp"),
            LayerSpec::Sc => f.write_str("sc"),
            LayerSpec::Fc(FcWidth::Fixed(n)) => write!(f, "fc({n})"),
            LayerSpec::Fc(FcWidth::Classes) => f.write_str("fc(@classes)"),
            LayerSpec::Softmax => f.write_str("softmax"),
        }
    }
}

/// A parsed (syntactically valid) layer list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.layers.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" | "))
    }
}

impl Architecture {
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }

    /// TDNN baseline: four time-delay layers, statistics pooling, two
    /// fully connected layers.
    pub fn tdnn(width: usize) -> Self {
        Self::parse(&format!(
            "td(-2:2)x{width} | td(-1:2)x{width} | td(-3:3)x{width} | td(-7:2)x{width} \
             | sp | fc({}) | fc(@classes) | softmax",
            2 * width
        ))
        .expect("preset is well formed")
    }

    /// Crossed time-delay network: three parallel units with contexts
    /// [-4,4], [-2,2], [-1,1], one [-1,1] unit stacked per branch, then
    /// statistics concatenation and two fully connected layers.
    pub fn ctdnn(width: usize) -> Self {
        Self::parse(&format!(
            "ctd(-4:4,-2:2,-1:1)x{width} | ctd(-1:1)*3x{width} | sc | fc({}) | fc(@classes) | softmax",
            2 * width
        ))
        .expect("preset is well formed")
    }

    pub fn preset(name: &str, width: usize) -> Option<Self> {
        match name {
            TDNN_PRESET => Some(Self::tdnn(width)),
            CTDNN_PRESET => Some(Self::ctdnn(width)),
            _ => None,
        }
    }

    /// Preset name or DSL text.
    pub fn resolve(text: &str, width: usize) -> Result<Self> {
        let trimmed = text.trim();
        match Self::preset(trimmed, width) {
            Some(a) => Ok(a),
            None => Self::parse(trimmed),
        }
    }
}

/// Parses DSL text into an architecture. Semantic checks happen in
/// [`ModelConfig::new`](super::ModelConfig::new).
pub fn parse_arch(text: &str) -> Result<Architecture> {
    Architecture::parse(text)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, expected: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos,
            expected: expected.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("'{}'", c as char))
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).expect("ascii")
    }

    fn int(&mut self, what: &str) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.src.get(self.pos), Some(b'-' | b'+')) {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            self.pos = start;
            return self.err(what);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse().or_else(|_| {
            self.pos = start;
            self.err(format!("{what} within range"))
        })
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        let v = self.int(what)?;
        if v < 1 {
            self.pos = start;
            self.skip_ws();
            return self.err(format!("positive {what}"));
        }
        usize::try_from(v).or_else(|_| self.err(what))
    }

    fn context(&mut self) -> Result<ContextWindow> {
        self.skip_ws();
        let start = self.pos;
        let l = self.int("context offset")?;
        self.expect(b':')?;
        let r = self.int("context offset")?;
        let (l, r) = match (i32::try_from(l), i32::try_from(r)) {
            (Ok(l), Ok(r)) => (l, r),
            _ => {
                self.pos = start;
                return self.err("context offsets within i32");
            }
        };
        ContextWindow::new(l, r).or_else(|_| {
            self.pos = start;
            self.err("context L:R with L <= 0 <= R")
        })
    }

    fn layer(&mut self) -> Result<LayerSpec> {
        let start = self.pos;
        let word = self.word();
        match word {
            "td" => {
                self.expect(b'(')?;
                let context = self.context()?;
                self.expect(b')')?;
                self.expect(b'x')?;
                let width = self.count("layer width")?;
                Ok(LayerSpec::Td { context, width })
            }
            "ctd" => {
                self.expect(b'(')?;
                let mut contexts = vec![self.context()?];
                while self.eat(b',') {
                    contexts.push(self.context()?);
                }
                self.expect(b')')?;
                let replicate = if contexts.len() == 1 && self.eat(b'*') {
                    Some(self.count("replication count")?)
                } else {
                    None
                };
                self.expect(b'x')?;
                let width = self.count("layer width")?;
                Ok(LayerSpec::Ctd {
                    contexts,
                    replicate,
                    width,
                })
            }
            "sp" => Ok(LayerSpec::Sp),
            "sc" => Ok(LayerSpec::Sc),
            "softmax" => Ok(LayerSpec::Softmax),
            "fc" => {
                self.expect(b'(')?;
                let width = if self.eat(b'@') {
                    if self.word() != "classes" {
                        return self.err("'classes' after '@'");
                    }
                    FcWidth::Classes
                } else {
                    FcWidth::Fixed(self.count("fc width or @classes")?)
                };
                self.expect(b')')?;
                Ok(LayerSpec::Fc(width))
            }
            _ => {
                self.pos = start;
                self.skip_ws();
                self.err("one of td, ctd, sp, sc, fc, softmax")
            }
        }
    }

    fn parse(mut self) -> Result<Architecture> {
        let mut layers = vec![self.layer()?];
        loop {
            match self.peek() {
                None => break,
                Some(b'|') => {
                    self.pos += 1;
                    layers.push(self.layer()?);
                }
                Some(_) => return self.err("'|' or end of input"),
            }
        }
        Ok(Architecture { layers })
    }
}

/// Validated architecture bound to an input dimension and class count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub arch: Architecture,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Index into `arch.layers` of the sp/sc layer the embedding is read from.
    pub embed_tap: usize,
}

fn semantic<T>(rule: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(Error::Semantic {
        rule,
        detail: detail.into(),
    })
}

impl ModelConfig {
    pub fn new(arch: Architecture, input_dim: usize, num_classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::validation("input_dim", "must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::validation("num_classes", "need at least 2 classes"));
        }
        let layers = &arch.layers;

        let pools: Vec<usize> = (0..layers.len()).filter(|&i| layers[i].is_pooling()).collect();
        let tap = match pools.as_slice() {
            [] => return semantic("single-pooling", "no sp or sc layer"),
            [tap] => *tap,
            _ => return semantic("single-pooling", format!("{} pooling layers", pools.len())),
        };
        if !layers[..tap].iter().any(LayerSpec::is_time_delay) {
            return semantic(
                "pooling-after-time-delay",
                format!("pooling at layer {tap} precedes any td layer"),
            );
        }

        // Branch topology of the time-delay stack.
        let mut branches = 1usize;
        for (i, l) in layers[..tap].iter().enumerate() {
            if !l.is_time_delay() {
                return semantic(
                    "time-delay-before-pooling",
                    format!("{} at layer {i} before pooling", l.name()),
                );
            }
            let units = l.unit_contexts().len();
            if branches > 1 && units != branches {
                return semantic(
                    "branch-allocation",
                    format!("layer {i} has {units} units for {branches} incoming branches"),
                );
            }
            branches = units;
        }
        match (&layers[tap], &layers[tap - 1]) {
            (LayerSpec::Sp, LayerSpec::Td { .. }) | (LayerSpec::Sc, LayerSpec::Ctd { .. }) => {}
            (LayerSpec::Sp, prev) => {
                return semantic("sp-follows-td", format!("sp follows {}", prev.name()))
            }
            (_, prev) => return semantic("sc-follows-ctd", format!("sc follows {}", prev.name())),
        }

        let tail = &layers[tap + 1..];
        if tail.len() < 2 || !matches!(tail[tail.len() - 1], LayerSpec::Softmax) {
            return semantic("classifier-tail", "layers must end with fc then softmax");
        }
        for (j, l) in tail[..tail.len() - 1].iter().enumerate() {
            match l {
                LayerSpec::Fc(FcWidth::Classes) if j + 2 != tail.len() => {
                    return semantic("classifier-tail", "fc(@classes) must be the last fc")
                }
                LayerSpec::Fc(_) => {}
                other => {
                    return semantic(
                        "only-fc-after-pooling",
                        format!("{} at layer {}", other.name(), tap + 1 + j),
                    )
                }
            }
        }
        if let LayerSpec::Fc(FcWidth::Fixed(n)) = tail[tail.len() - 2] {
            if n != num_classes {
                return semantic(
                    "classifier-width",
                    format!("final fc has {n} outputs for {num_classes} classes"),
                );
            }
        }

        Ok(Self {
            arch,
            input_dim,
            num_classes,
            embed_tap: tap,
        })
    }

    pub fn from_text(text: &str, width: usize, input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::new(Architecture::resolve(text, width)?, input_dim, num_classes)
    }

    /// Time-delay layers in order, each as its list of unit contexts and
    /// width.
    pub fn time_delay_layers(&self) -> Vec<(Vec<ContextWindow>, usize)> {
        self.arch.layers[..self.embed_tap]
            .iter()
            .map(|l| match l {
                LayerSpec::Td { width, .. } | LayerSpec::Ctd { width, .. } => (l.unit_contexts(), *width),
                _ => unreachable!("validated"),
            })
            .collect()
    }

    /// Output widths of the fully connected layers after pooling.
    pub fn dense_widths(&self) -> Vec<usize> {
        self.arch.layers[self.embed_tap + 1..]
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Fc(FcWidth::Fixed(n)) => Some(*n),
                LayerSpec::Fc(FcWidth::Classes) => Some(self.num_classes),
                _ => None,
            })
            .collect()
    }

    /// Length of the pooled vector: `Σ 2·H` over the final branches.
    pub fn embedding_dim(&self) -> usize {
        let (contexts, width) = self.time_delay_layers().pop().expect("validated");
        2 * width * contexts.len()
    }

    /// Minimum input length that leaves at least one frame on every branch.
    pub fn min_frames(&self) -> usize {
        let layers = self.time_delay_layers();
        let mut shrink = vec![0usize; 1];
        for (contexts, _) in &layers {
            let inputs = shrink.clone();
            shrink = contexts
                .iter()
                .enumerate()
                .map(|(u, c)| inputs[if inputs.len() == 1 { 0 } else { u }] + c.shrink())
                .collect();
        }
        shrink.into_iter().max().unwrap_or(0) + 1
    }
}

/// Number of trainable scalars: time-delay weights and biases, batch-norm
/// scale and shift, fully connected weights and biases.
pub fn param_count(config: &ModelConfig) -> usize {
    let mut total = 0;
    let mut in_dims = vec![config.input_dim];
    for (contexts, width) in config.time_delay_layers() {
        total += in_dims.iter().map(|d| 2 * d).sum::<usize>();
        total += contexts
            .iter()
            .enumerate()
            .map(|(u, c)| {
                let d = in_dims[if in_dims.len() == 1 { 0 } else { u }];
                width * c.span() * d + width
            })
            .sum::<usize>();
        in_dims = vec![width; contexts.len()];
    }
    let mut fan_in = config.embedding_dim();
    for out in config.dense_widths() {
        total += out * fan_in + out;
        fan_in = out;
    }
    total
}
