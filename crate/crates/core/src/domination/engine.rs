//! The recursion shared by every stopping time.
//!
//! `S_0` is the set of maximal intervals of the family. For each `Q0` the rule
//! selects `𝓘_{Q0}` from the stock, the selection leaves the stock, and the
//! children of `Q0` are computed from what remains. If some `Q0` spends more
//! than half of its measure on children, the run restarts with `C` doubled.

use std::collections::VecDeque;

use log::debug;

use crate::dyadic::{node_count, DyadicInterval};
use crate::error::{invalid, Error, Result};

/// Intervals of the family not yet selected, with per-subtree counts.
pub(crate) struct Stock {
    depth: u32,
    member: Vec<bool>,
    count: Vec<u32>,
}

impl Stock {
    pub(crate) fn new(family: &[DyadicInterval], depth: u32) -> Self {
        let n = node_count(depth.saturating_sub(1));
        let mut stock = Stock {
            depth,
            member: vec![false; n],
            count: vec![0; n],
        };
        for &i in family {
            if !stock.member[i.node()] {
                stock.member[i.node()] = true;
                let mut a = Some(i);
                while let Some(x) = a {
                    stock.count[x.node()] += 1;
                    a = x.parent();
                }
            }
        }
        stock
    }

    #[inline]
    pub(crate) fn contains_node(&self, node: usize) -> bool {
        self.member.get(node).copied().unwrap_or(false)
    }

    pub(crate) fn any_in(&self, q: DyadicInterval) -> bool {
        q.depth() < self.depth && self.count[q.node()] > 0
    }

    fn remove(&mut self, i: DyadicInterval) {
        if self.member[i.node()] {
            self.member[i.node()] = false;
            let mut a = Some(i);
            while let Some(x) = a {
                self.count[x.node()] -= 1;
                a = x.parent();
            }
        }
    }

    /// Stock members inside `q`, coarse to fine.
    pub(crate) fn members_in(&self, q: DyadicInterval) -> Vec<DyadicInterval> {
        let mut out = Vec::new();
        let mut frontier = vec![q];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for x in frontier {
                if !self.any_in(x) {
                    continue;
                }
                if self.member[x.node()] {
                    out.push(x);
                }
                if x.depth() + 1 < self.depth {
                    next.extend(x.children());
                }
            }
            frontier = next;
        }
        out.sort();
        out
    }

    /// Maximal stock members inside `q` (including `q` itself).
    fn maximal_in(&self, q: DyadicInterval) -> Vec<DyadicInterval> {
        let mut out = Vec::new();
        let mut stack = vec![q];
        while let Some(x) = stack.pop() {
            if !self.any_in(x) {
                continue;
            }
            if self.member[x.node()] {
                out.push(x);
            } else if x.depth() + 1 < self.depth {
                stack.extend(x.children());
            }
        }
        out.sort();
        out
    }
}

pub(crate) enum ChildRule {
    /// Maximal dyadic subintervals that violate the rule and contain stock.
    Dyadic,
    /// Maximal remaining stock intervals.
    MaximalStock,
}

pub(crate) trait Rule {
    fn child_rule(&self) -> ChildRule;

    /// `𝓘_{Q0}` among `members`, the current stock inside `q0`.
    fn select(
        &mut self,
        q0: DyadicInterval,
        stock: &Stock,
        members: &[DyadicInterval],
        c: f64,
    ) -> Vec<DyadicInterval>;

    /// Only consulted for [`ChildRule::Dyadic`].
    fn violates(&self, _q0: DyadicInterval, _q: DyadicInterval, _c: f64) -> bool {
        false
    }

    /// Measure used by the child budget.
    fn measure(&self, q: DyadicInterval) -> f64 {
        q.len()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub q: DyadicInterval,
    pub parent: Option<DyadicInterval>,
    pub subfamily: Vec<DyadicInterval>,
    pub children: Vec<DyadicInterval>,
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub nodes: Vec<Node>,
    pub c: f64,
    pub retries: u32,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Schedule {
    pub c: f64,
    pub max_retries: u32,
}

impl Schedule {
    pub(crate) fn check(&self) -> Result<()> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(invalid(
                "C",
                format!(
                    "stopping constant must be finite and at least 1, got {}",
                    self.c
                ),
            ));
        }
        Ok(())
    }
}

pub(crate) fn run(
    family: &[DyadicInterval],
    depth: u32,
    rule: &mut dyn Rule,
    schedule: Schedule,
) -> Result<Outcome> {
    schedule.check()?;
    if let Some(&i) = family.iter().find(|i| i.depth() >= depth) {
        return Err(Error::NoHaarMode { interval: i, depth });
    }
    let mut c = schedule.c;
    for retries in 0..=schedule.max_retries {
        match attempt(family, depth, rule, c) {
            Some(nodes) => return Ok(Outcome { nodes, c, retries }),
            None => {
                debug!(
                    "child budget exceeded at C = {c}; retrying with {}",
                    2.0 * c
                );
                c *= 2.0;
            }
        }
    }
    Err(Error::SparsityNotReached {
        retries: schedule.max_retries,
        last_c: c / 2.0,
    })
}

fn attempt(
    family: &[DyadicInterval],
    depth: u32,
    rule: &mut dyn Rule,
    c: f64,
) -> Option<Vec<Node>> {
    let mut stock = Stock::new(family, depth);
    let mut queue: VecDeque<(DyadicInterval, Option<DyadicInterval>)> = stock
        .maximal_in(DyadicInterval::ROOT)
        .into_iter()
        .map(|q| (q, None))
        .collect();
    let mut nodes = Vec::new();
    while let Some((q0, parent)) = queue.pop_front() {
        let members = stock.members_in(q0);
        let selected = rule.select(q0, &stock, &members, c);
        for &s in &selected {
            stock.remove(s);
        }
        let children = match rule.child_rule() {
            ChildRule::MaximalStock => {
                let ch = stock.maximal_in(q0);
                if ch.contains(&q0) {
                    // Q0 failed its own test: C is too small for this rule.
                    return None;
                }
                ch
            }
            ChildRule::Dyadic => dyadic_children(&stock, rule, q0, c),
        };
        let spent: f64 = children.iter().map(|&p| rule.measure(p)).sum();
        if spent > rule.measure(q0) / 2.0 {
            return None;
        }
        for &p in &children {
            queue.push_back((p, Some(q0)));
        }
        nodes.push(Node {
            q: q0,
            parent,
            subfamily: selected,
            children,
        });
    }
    Some(nodes)
}

fn dyadic_children(
    stock: &Stock,
    rule: &dyn Rule,
    q0: DyadicInterval,
    c: f64,
) -> Vec<DyadicInterval> {
    let mut out = Vec::new();
    let mut stack: Vec<DyadicInterval> = if q0.depth() + 1 < stock.depth {
        q0.children().to_vec()
    } else {
        Vec::new()
    };
    while let Some(q) = stack.pop() {
        if !stock.any_in(q) {
            continue;
        }
        if rule.violates(q0, q, c) {
            out.push(q);
        } else if q.depth() + 1 < stock.depth {
            stack.extend(q.children());
        }
    }
    out.sort();
    out
}
