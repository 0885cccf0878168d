//! On-line Viterbi: compressed back-pointer tree, dynamic coalescence
//! detection, and prefix emission.
//!
//! The survivor paths of the Viterbi recurrence form a tree over
//! (position, state) nodes. [`StreamDecoder`] maintains the compressed form
//! of that tree — every internal node has at least two children, so it never
//! holds more than `m` leaves and `m - 1` internal nodes — plus the window
//! of back-pointer columns between the last emitted position and the
//! current one. When the compression sweep finds a node with no branching
//! ancestor, that node is the coalescence point: every surviving path shares
//! the prefix ending there, so the prefix is emitted and the window shrinks.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::hmm::{Hmm, StatePath};
use crate::logprob::LogProb;
use crate::metrics::MemoryTrace;
use crate::trellis::initial_column;
use crate::{State, Symbol};

const NIL: u32 = u32::MAX;
/// State marker for the virtual root: it sits at position 0 and carries no
/// decoded state.
const NO_STATE: State = State::MAX;

/// Node of the compressed back-pointer tree. Nodes live in a slab indexed by
/// `u32` ids and are chained into a doubly-linked list ordered by sequence
/// position (`head` is the oldest).
#[derive(Clone, Debug)]
struct Node {
    position: u64,
    state: State,
    children: u32,
    parent: u32,
    prev: u32,
    next: u32,
    dead: bool,
}

/// Cumulative tree-maintenance work, the basis of the amortized O(m)
/// per-position cost contract. `relink_steps` counts every parent link
/// followed during the compression sweep, splices included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TreeOpCounters {
    pub created: u64,
    pub deleted: u64,
    pub relink_steps: u64,
}

impl TreeOpCounters {
    pub fn total(&self) -> u64 {
        self.created + self.deleted + self.relink_steps
    }
}

/// Summary returned when a stream finishes.
#[derive(Clone, Debug)]
pub struct StreamSummary {
    /// Log-probability of the complete decoded path.
    pub log_prob: LogProb,
    pub trace: MemoryTrace,
    pub ops: TreeOpCounters,
    /// Number of symbols consumed.
    pub positions: u64,
}

/// Incremental Viterbi decoder.
///
/// Feed symbols one at a time; each [`feed`](Self::feed) returns the path
/// states that became final (usually none, sometimes a batch after a
/// coalescence), and [`finish`](Self::finish) flushes the rest. The
/// concatenation of all returned segments equals the full-table Viterbi path
/// exactly, including tie-breaks.
pub struct StreamDecoder<'a> {
    hmm: &'a Hmm,
    /// Current column scores P(position, ·), raw natural logs.
    scores: Vec<f64>,
    next_scores: Vec<f64>,
    position: u64,
    /// Positions `<= emitted` have been output; always `< position`.
    emitted: u64,
    /// Back-pointer columns for positions `(emitted, position]`. The column
    /// for position 1 is an empty placeholder (the recurrence has no
    /// predecessor there) and is never consulted.
    window: VecDeque<Box<[State]>>,
    nodes: Vec<Node>,
    free: Vec<u32>,
    head: u32,
    tail: u32,
    root: u32,
    /// Leaf id per state at the current position; NIL for unreachable states.
    leaves: Vec<u32>,
    prev_leaves: Vec<u32>,
    sweep: Vec<u32>,
    bp_scratch: Vec<State>,
    trace: MemoryTrace,
    ops: TreeOpCounters,
    aborted: bool,
}

impl<'a> StreamDecoder<'a> {
    /// Starts a stream on its first symbol. No emission happens here even
    /// when only one state is reachable; the first feed settles it.
    pub fn start(hmm: &'a Hmm, first_symbol: Symbol) -> Result<Self> {
        Self::start_with_stride(hmm, first_symbol, 1)
    }

    /// Like [`start`](Self::start) with an explicit memory-trace stride.
    pub fn start_with_stride(hmm: &'a Hmm, first_symbol: Symbol, stride: u64) -> Result<Self> {
        let col = initial_column(hmm, first_symbol)?;
        let m = hmm.num_states();
        let mut dec = StreamDecoder {
            hmm,
            scores: col.scores.iter().map(|s| s.value()).collect(),
            next_scores: vec![0.0; m],
            position: 1,
            emitted: 0,
            window: VecDeque::new(),
            nodes: Vec::with_capacity(2 * m + 2),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
            root: NIL,
            leaves: vec![NIL; m],
            prev_leaves: vec![NIL; m],
            sweep: Vec::with_capacity(3 * m + 2),
            bp_scratch: vec![0; m],
            trace: MemoryTrace::new(stride),
            ops: TreeOpCounters::default(),
            aborted: false,
        };
        dec.root = dec.alloc(0, NO_STATE, NIL);
        for j in 0..m {
            if dec.scores[j] > f64::NEG_INFINITY {
                let id = dec.alloc(1, j as State, dec.root);
                dec.nodes[dec.root as usize].children += 1;
                dec.leaves[j] = id;
            }
        }
        dec.window.push_back(Box::new([]));
        dec.trace.record(1);
        Ok(dec)
    }

    /// Consumes one symbol and returns any path states that became final,
    /// in sequence order.
    ///
    /// A symbol no state can emit aborts the stream: the error is returned,
    /// nothing is flushed, and the decoder refuses further use.
    pub fn feed(&mut self, symbol: Symbol) -> Result<Vec<State>> {
        if self.aborted {
            return Err(Error::Domain("stream already aborted".into()));
        }
        let position = self.position + 1;
        if let Err(e) = self.hmm.check_symbol(symbol, position) {
            self.aborted = true;
            return Err(e);
        }

        // Forward step on raw scores; arithmetic and tie-breaks identical to
        // trellis::forward_step.
        let m = self.hmm.num_states();
        let mut any_finite = false;
        for j in 0..m {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for k in 0..m {
                let cand = self.scores[k] + self.hmm.trans(k, j).value();
                if cand > best {
                    best = cand;
                    arg = k;
                }
            }
            let s = best + self.hmm.emit(j, symbol).value();
            any_finite |= s > f64::NEG_INFINITY;
            self.next_scores[j] = s;
            self.bp_scratch[j] = arg as State;
        }
        if !any_finite {
            self.aborted = true;
            return Err(Error::ImpossibleSequence { position });
        }
        std::mem::swap(&mut self.scores, &mut self.next_scores);
        self.position = position;
        self.window.push_back(self.bp_scratch.clone().into_boxed_slice());

        let emitted_segment = self.update_tree();
        self.trace.record(self.window.len() as u64);
        #[cfg(debug_assertions)]
        self.check_invariants();
        Ok(emitted_segment)
    }

    /// Flushes the unsettled suffix: picks the best current state
    /// (smallest index on ties) and backtracks through the window.
    pub fn finish(mut self) -> Result<(Vec<State>, StreamSummary)> {
        if self.aborted {
            return Err(Error::Domain("stream already aborted".into()));
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0usize;
        for (j, &s) in self.scores.iter().enumerate() {
            if s > best {
                best = s;
                arg = j;
            }
        }
        let suffix = self.backtrack(self.position, arg as State, self.position);
        let summary = StreamSummary {
            log_prob: LogProb(best),
            trace: self.trace,
            ops: self.ops,
            positions: self.position,
        };
        Ok((suffix, summary))
    }

    /// Retained back-pointer columns: always `position - emitted`.
    pub fn window_len(&self) -> u64 {
        self.window.len() as u64
    }

    /// 1-based position of the last consumed symbol.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Positions already emitted.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn tree_ops(&self) -> TreeOpCounters {
        self.ops
    }

    pub fn trace(&self) -> &MemoryTrace {
        &self.trace
    }

    // ----- tree maintenance ------------------------------------------------

    fn alloc(&mut self, position: u64, state: State, parent: u32) -> u32 {
        let node = Node {
            position,
            state,
            children: 0,
            parent,
            prev: self.tail,
            next: NIL,
            dead: false,
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        if self.tail != NIL {
            self.nodes[self.tail as usize].next = id;
        } else {
            self.head = id;
        }
        self.tail = id;
        self.ops.created += 1;
        id
    }

    fn unlink(&mut self, id: u32) {
        let (prev, next) = {
            let n = &self.nodes[id as usize];
            debug_assert!(!n.dead);
            (n.prev, n.next)
        };
        if prev != NIL {
            self.nodes[prev as usize].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.nodes[next as usize].prev = prev;
        } else {
            self.tail = prev;
        }
        self.nodes[id as usize].dead = true;
        self.free.push(id);
        self.ops.deleted += 1;
    }

    /// The per-position update from the compressed-tree algorithm: attach a
    /// leaf for every reachable state, prune former leaves left childless,
    /// then sweep the node list in decreasing position order, contracting
    /// single-child chains and relinking each surviving node to its nearest
    /// branching ancestor. A node left without one is the coalescence point
    /// and becomes the new root; the settled prefix is returned.
    fn update_tree(&mut self) -> Vec<State> {
        let m = self.hmm.num_states();
        let position = self.position;
        let newest_col = self.window.len() - 1;

        std::mem::swap(&mut self.leaves, &mut self.prev_leaves);
        self.leaves.fill(NIL);
        for j in 0..m {
            if self.scores[j] > f64::NEG_INFINITY {
                let pred = self.window[newest_col][j] as usize;
                let parent = self.prev_leaves[pred];
                debug_assert!(parent != NIL, "finite score from unreachable predecessor");
                let id = self.alloc(position, j as State, parent);
                self.nodes[parent as usize].children += 1;
                self.leaves[j] = id;
            }
        }

        for k in 0..m {
            let mut cur = self.prev_leaves[k];
            if cur == NIL {
                continue;
            }
            while cur != NIL && !self.nodes[cur as usize].dead && self.nodes[cur as usize].children == 0
            {
                let parent = self.nodes[cur as usize].parent;
                self.unlink(cur);
                if parent != NIL {
                    self.nodes[parent as usize].children -= 1;
                }
                cur = parent;
            }
        }

        // Snapshot ids in decreasing-position order; walks only delete nodes
        // the cursor has not reached yet, which the dead flag covers.
        self.sweep.clear();
        let mut cur = self.tail;
        while cur != NIL {
            self.sweep.push(cur);
            cur = self.nodes[cur as usize].prev;
        }

        let mut new_root = NIL;
        for idx in 0..self.sweep.len() {
            let id = self.sweep[idx];
            let node = &self.nodes[id as usize];
            if node.dead {
                continue;
            }
            let is_current_leaf = node.position == position;
            if !is_current_leaf && node.children < 2 {
                // Every contractible node is spliced by the walk of its
                // nearest surviving descendant before the cursor gets here.
                debug_assert!(false, "unspliced single-child node in sweep");
                let parent = node.parent;
                self.unlink(id);
                if parent != NIL {
                    self.nodes[parent as usize].children -= 1;
                }
                continue;
            }
            let mut p = self.nodes[id as usize].parent;
            while p != NIL && self.nodes[p as usize].children < 2 {
                let pp = self.nodes[p as usize].parent;
                self.unlink(p);
                self.ops.relink_steps += 1;
                p = pp;
            }
            self.ops.relink_steps += 1;
            self.nodes[id as usize].parent = p;
            if p == NIL {
                debug_assert!(new_root == NIL || new_root == id, "two roots in one sweep");
                new_root = id;
            }
        }

        if new_root == NIL {
            return Vec::new();
        }
        self.root = new_root;
        let root_pos = self.nodes[new_root as usize].position;
        let root_state = self.nodes[new_root as usize].state;
        // When the root is the current position's only leaf its state is not
        // yet emitted; it goes out when the root advances past it. This keeps
        // the window at least one column long at all times.
        let emit_to = root_pos.min(position - 1);
        if emit_to <= self.emitted {
            return Vec::new();
        }
        let segment = self.backtrack(root_pos, root_state, emit_to);
        for _ in 0..(emit_to - self.emitted) {
            self.window.pop_front();
        }
        self.emitted = emit_to;
        segment
    }

    /// States for positions `(emitted, emit_to]`, recovered by following
    /// window back pointers from the known `(pos, state)` anchor.
    /// `pos - emit_to` is at most 1.
    fn backtrack(&self, pos: u64, state: State, emit_to: u64) -> Vec<State> {
        debug_assert!(emit_to > self.emitted && emit_to <= pos);
        let mut out = vec![0 as State; (emit_to - self.emitted) as usize];
        let mut p = pos;
        let mut s = state;
        while p > emit_to {
            s = self.window_col(p)[s as usize];
            p -= 1;
        }
        loop {
            out[(p - self.emitted - 1) as usize] = s;
            if p == self.emitted + 1 {
                break;
            }
            s = self.window_col(p)[s as usize];
            p -= 1;
        }
        out
    }

    fn window_col(&self, pos: u64) -> &[State] {
        &self.window[(pos - self.emitted - 1) as usize]
    }

    #[cfg(debug_assertions)]
    fn check_invariants(&self) {
        let m = self.hmm.num_states() as u64;
        assert_eq!(self.window.len() as u64, self.position - self.emitted);
        let mut leaves = 0u64;
        let mut internal = 0u64;
        let mut cur = self.head;
        let mut last_pos = 0;
        while cur != NIL {
            let n = &self.nodes[cur as usize];
            assert!(!n.dead);
            assert!(n.position >= last_pos, "list out of position order");
            last_pos = n.position;
            if n.position == self.position {
                leaves += 1;
            } else {
                internal += 1;
                assert!(n.children >= 2 || cur == self.root);
            }
            if n.parent != NIL {
                assert!(self.nodes[n.parent as usize].position < n.position);
            }
            cur = n.next;
        }
        assert!(leaves <= m, "{leaves} leaves exceed m = {m}");
        assert!(internal <= m.saturating_sub(1) + 1, "{internal} internal nodes");
    }
}

/// Decoded result of running the stream decoder over a whole sequence.
#[derive(Clone, Debug)]
pub struct OnlineDecoded {
    pub path: StatePath,
    pub log_prob: LogProb,
    pub trace: MemoryTrace,
    pub ops: TreeOpCounters,
}

/// Streams `seq` through a [`StreamDecoder`] and reassembles the full path.
pub fn decode_online(hmm: &Hmm, seq: &[Symbol]) -> Result<OnlineDecoded> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let stride = MemoryTrace::auto_stride(seq.len() as u64);
    let mut dec = StreamDecoder::start_with_stride(hmm, seq[0], stride)?;
    let mut path = Vec::with_capacity(seq.len());
    for &x in &seq[1..] {
        path.extend(dec.feed(x)?);
    }
    let (suffix, summary) = dec.finish()?;
    path.extend(suffix);
    debug_assert_eq!(path.len(), seq.len());
    Ok(OnlineDecoded {
        path: StatePath(path),
        log_prob: summary.log_prob,
        trace: summary.trace,
        ops: summary.ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::viterbi_full;

    fn sym() -> Hmm {
        Hmm::symmetric_two_state(0.1, 0.2).unwrap()
    }

    fn one_state() -> Hmm {
        Hmm::new(1, 1, &[1.0], &[1.0], &[1.0]).unwrap()
    }

    #[test]
    fn start_has_one_window_column_and_no_output() {
        let h = sym();
        let dec = StreamDecoder::start(&h, 0).unwrap();
        assert_eq!(dec.window_len(), 1);
        assert_eq!(dec.emitted(), 0);
    }

    #[test]
    fn start_with_single_reachable_state() {
        let h = Hmm::new(2, 2, &[0.5, 0.5], &[0.5; 4], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let dec = StreamDecoder::start(&h, 0).unwrap();
        assert_eq!(dec.leaves.iter().filter(|&&l| l != NIL).count(), 1);
    }

    #[test]
    fn start_impossible_symbol() {
        let h = Hmm::new(1, 2, &[1.0], &[1.0], &[1.0, 0.0]).unwrap();
        assert!(StreamDecoder::start(&h, 1).is_err());
    }

    #[test]
    fn finish_right_after_start_returns_initial_argmax() {
        let h = sym();
        let dec = StreamDecoder::start(&h, 0).unwrap();
        let (suffix, summary) = dec.finish().unwrap();
        assert_eq!(suffix, vec![0]);
        assert_eq!(summary.positions, 1);
    }

    #[test]
    fn one_state_model_emits_each_feed() {
        let h = one_state();
        let mut dec = StreamDecoder::start(&h, 0).unwrap();
        // The start position is settled but deferred; the first feed flushes
        // it, and every subsequent feed emits exactly one state.
        for i in 0..10 {
            let seg = dec.feed(0).unwrap();
            assert_eq!(seg, vec![0], "feed {i}");
            assert_eq!(dec.window_len(), 1);
        }
        let (suffix, summary) = dec.finish().unwrap();
        assert_eq!(suffix, vec![0]);
        assert_eq!(summary.positions, 11);
        // Hand-traced bookkeeping for the single-chain tree, with slack for
        // the virtual root.
        let n = 10;
        assert!(summary.ops.created as i64 - n <= 2);
        assert!((summary.ops.deleted as i64 - (n - 1)).abs() <= 2);
        assert!(summary.ops.deleted <= summary.ops.created);
    }

    #[test]
    fn symmetric_pair_of_zeros_coalesces_at_position_one() {
        let h = sym();
        let mut dec = StreamDecoder::start(&h, 0).unwrap();
        let seg = dec.feed(0).unwrap();
        // Both position-2 back pointers name state 0, so position 1 is
        // settled as [0] and the window holds only column 2.
        assert_eq!(seg, vec![0]);
        assert_eq!(dec.emitted(), 1);
        assert_eq!(dec.window_len(), 1);
    }

    #[test]
    fn window_shrinks_by_emitted_count() {
        let h = sym();
        let seq: Vec<u8> = vec![0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0];
        let mut dec = StreamDecoder::start(&h, seq[0]).unwrap();
        let mut prev_len = dec.window_len();
        for &x in &seq[1..] {
            let seg = dec.feed(x).unwrap();
            let len = dec.window_len();
            assert_eq!(len, prev_len + 1 - seg.len() as u64);
            assert_eq!(len, dec.position() - dec.emitted());
            prev_len = len;
        }
    }

    #[test]
    fn stream_matches_full_viterbi_exactly() {
        let h = sym();
        // Deterministic pseudo-random bits, long enough to cross many
        // coalescence events.
        let mut x = 0x243f6a8885a308d3u64;
        let seq: Vec<u8> = (0..20_000)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                (x & 1) as u8
            })
            .collect();
        let full = viterbi_full(&h, &seq).unwrap();
        let online = decode_online(&h, &seq).unwrap();
        assert_eq!(online.path, full.path);
        assert!((online.log_prob.value() - full.log_prob.value()).abs() < 1e-9);
        assert!(online.trace.peak() < 1000, "peak {}", online.trace.peak());
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        let h = sym();
        for n in 1..=8usize {
            for code in 0..(1u32 << n) {
                let seq: Vec<u8> = (0..n).map(|i| ((code >> i) & 1) as u8).collect();
                let online = decode_online(&h, &seq).unwrap();
                let full = viterbi_full(&h, &seq).unwrap();
                assert_eq!(online.path, full.path, "n={n} code={code}");
            }
        }
    }

    #[test]
    fn impossible_symbol_aborts_stream() {
        let h = Hmm::new(1, 2, &[1.0], &[1.0], &[1.0, 0.0]).unwrap();
        let mut dec = StreamDecoder::start(&h, 0).unwrap();
        assert!(dec.feed(0).is_ok());
        let err = dec.feed(1).unwrap_err();
        assert!(matches!(err, Error::ImpossibleSequence { position: 3 }));
        assert!(dec.feed(0).is_err());
    }

    #[test]
    fn tree_op_conservation() {
        let h = sym();
        let seq: Vec<u8> = (0..500).map(|i| ((i * 13 + 5) % 7 > 3) as u8).collect();
        let online = decode_online(&h, &seq).unwrap();
        assert!(online.ops.deleted <= online.ops.created);
        assert!(online.ops.created <= 2 * seq.len() as u64 + 2);
    }
}
