//! Node program shared by the state-generation protocols on a line.

use crate::error::Result;
use crate::netsim::{Decision, NodeCtx, NodeProgram};
use crate::qcore::{NodeId, Unitary};

/// Register of node `l` in column `c`; single-column runs drop the column.
pub(crate) fn reg(columns: bool, l: usize, c: usize) -> String {
    if columns {
        format!("R{l}.{c}")
    } else {
        format!("R{l}")
    }
}

pub(crate) struct LineNode {
    pub r: usize,
    pub columns: bool,
    /// Total columns; nodes `l ≥ 1` permute them when there are several.
    pub total: usize,
    pub tested: Vec<usize>,
    /// `U_l` on a register named `x`.
    pub unitary: Option<Unitary>,
    pub v_r_flips: bool,
    /// Qubits per half of the output register for a final SWAP test at `v_r`.
    pub final_swap: Option<usize>,
}

impl LineNode {
    fn name(&self, l: usize, c: usize) -> String {
        reg(self.columns, l, c)
    }
}

impl NodeProgram for LineNode {
    fn send(&self, ctx: &mut NodeCtx<'_>) -> Result<()> {
        let l = ctx.node().0;
        if l >= 1 && self.total > 1 {
            let mut pool: Vec<usize> = (0..self.total).collect();
            let mut pi = Vec::with_capacity(self.total);
            for i in 0..self.total {
                let idx = if pool.len() > 1 {
                    ctx.coin(&format!("pi{i}"), pool.len())?
                } else {
                    0
                };
                pi.push(pool.remove(idx));
            }
            let blocks: Vec<Vec<String>> = (1..=self.total).map(|c| vec![self.name(l, c)]).collect();
            ctx.permute_blocks(&blocks, &pi)?;
        }
        for &c in &self.tested {
            let b = if l < self.r || self.v_r_flips {
                ctx.coin(&format!("b{c}"), 2)?
            } else {
                1
            };
            ctx.set(&format!("b{c}"), b as u64);
            if b == 0 && l < self.r {
                ctx.send_quantum(NodeId(l + 1), &self.name(l, c))?;
            }
        }
        Ok(())
    }

    fn decide(&self, ctx: &mut NodeCtx<'_>) -> Result<Decision> {
        let l = ctx.node().0;
        if l == 0 {
            return Ok(Decision::Accept);
        }
        let got = ctx.received_from(NodeId(l - 1));
        for &c in &self.tested {
            let prev = self.name(l - 1, c);
            if ctx.get(&format!("b{c}")) == Some(1) && got.contains(&prev) {
                if let Some(u) = &self.unitary {
                    ctx.apply(&u.retarget(&[prev.as_str()]))?;
                }
                if !ctx.swap_test(&prev, &self.name(l, c))? {
                    return Ok(Decision::Reject);
                }
            }
        }
        if let (Some(half), true) = (self.final_swap, l == self.r) {
            let out = self.name(l, 1);
            ctx.split_register(&out, &[("A", half), ("B", half)])?;
            if !ctx.swap_test("A", "B")? {
                return Ok(Decision::Reject);
            }
        }
        Ok(Decision::Accept)
    }
}
