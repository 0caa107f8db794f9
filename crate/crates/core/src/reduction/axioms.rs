use crate::error::{Error, Result};
use crate::reduction::function_space::{DecoderSpace, EncoderSpace};
use crate::reduction::maps::FiniteMap;
use crate::reduction::verdict::check_reduction;
use crate::taskcore::{Policy, TaskSpec};

/// The indexed family of function spaces over a task set. `encoders[i][j]`
/// maps observations of task i to task j; `decoders[i][j]` maps actions of
/// task i to task j. Checking reduction of task i to task j uses
/// `encoders[i][j]` and `decoders[j][i]`.
#[derive(Debug, Clone)]
pub struct IndexedSpaces {
    pub n_tasks: usize,
    pub encoders: Vec<Vec<EncoderSpace>>,
    pub decoders: Vec<Vec<DecoderSpace>>,
}

impl IndexedSpaces {
    /// The common case where the same spaces serve every task pair.
    pub fn uniform(n_tasks: usize, encoder_space: EncoderSpace, decoder_space: DecoderSpace) -> Self {
        IndexedSpaces {
            n_tasks,
            encoders: vec![vec![encoder_space.clone(); n_tasks]; n_tasks],
            decoders: vec![vec![decoder_space.clone(); n_tasks]; n_tasks],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Encoder,
    Decoder,
}

#[derive(Debug, Clone)]
pub struct IdentityEntry {
    pub kind: SpaceKind,
    pub from: usize,
    pub to: usize,
    pub identity_present: bool,
}

#[derive(Debug, Clone)]
pub struct ClosureFailure {
    pub kind: SpaceKind,
    /// Task triple (1, 2, 3) in the role order of the closure definition.
    pub triple: (usize, usize, usize),
    pub outer_member: usize,
    pub inner_member: usize,
}

/// Report from [`verify_space_axioms`]: identity membership per space and
/// closure over all composable pairs; failures are entries, not errors.
#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub identity: Vec<IdentityEntry>,
    pub closure_failures: Vec<ClosureFailure>,
    pub compositions_checked: usize,
}

impl AxiomReport {
    /// Whether the ordering propositions' hypotheses (identity everywhere,
    /// closure everywhere) hold.
    pub fn hypotheses_hold(&self) -> bool {
        self.identity.iter().all(|e| e.identity_present) && self.closure_failures.is_empty()
    }
}

fn space_contains(space: &[&FiniteMap], candidate: &FiniteMap) -> bool {
    space.iter().any(|m| m.extensionally_equal(candidate))
}

/// Check identity membership and closure under composition for an indexed
/// family of explicit finite spaces.
pub fn verify_space_axioms(spaces: &IndexedSpaces) -> Result<AxiomReport> {
    let n = spaces.n_tasks;
    let mut identity = Vec::new();
    let mut closure_failures = Vec::new();
    let mut compositions_checked = 0usize;

    let enc: Vec<Vec<Vec<&FiniteMap>>> = spaces
        .encoders
        .iter()
        .map(|row| row.iter().map(|s| s.finite_members()).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let dec: Vec<Vec<Vec<&FiniteMap>>> = spaces
        .decoders
        .iter()
        .map(|row| row.iter().map(|s| s.finite_members()).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    for i in 0..n {
        for j in 0..n {
            identity.push(IdentityEntry {
                kind: SpaceKind::Encoder,
                from: i,
                to: j,
                identity_present: enc[i][j].iter().any(|m| m.is_identity()),
            });
            identity.push(IdentityEntry {
                kind: SpaceKind::Decoder,
                from: i,
                to: j,
                identity_present: dec[i][j].iter().any(|m| m.is_identity()),
            });
        }
    }

    // Closure over every task triple (t1, t2, t3):
    //   h1 ∈ H[t1][t2], h2 ∈ H[t2][t3]  =>  h2 ∘ h1 ∈ H[t1][t3]
    //   g1 ∈ G[t2][t1], g2 ∈ G[t3][t2]  =>  g1 ∘ g2 ∈ G[t3][t1]
    for t1 in 0..n {
        for t2 in 0..n {
            for t3 in 0..n {
                for (i2, h2) in enc[t2][t3].iter().enumerate() {
                    for (i1, h1) in enc[t1][t2].iter().enumerate() {
                        compositions_checked += 1;
                        let composed = h2.compose_after(h1)?;
                        if !space_contains(&enc[t1][t3], &composed) {
                            closure_failures.push(ClosureFailure {
                                kind: SpaceKind::Encoder,
                                triple: (t1, t2, t3),
                                outer_member: i2,
                                inner_member: i1,
                            });
                        }
                    }
                }
                for (i1, g1) in dec[t2][t1].iter().enumerate() {
                    for (i2, g2) in dec[t3][t2].iter().enumerate() {
                        compositions_checked += 1;
                        let composed = g1.compose_after(g2)?;
                        if !space_contains(&dec[t3][t1], &composed) {
                            closure_failures.push(ClosureFailure {
                                kind: SpaceKind::Decoder,
                                triple: (t1, t2, t3),
                                outer_member: i1,
                                inner_member: i2,
                            });
                        }
                    }
                }
            }
        }
    }

    Ok(AxiomReport { identity, closure_failures, compositions_checked })
}

#[derive(Debug, Clone)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Report from [`partial_order_audit`]: the axiom report, the computed
/// reduction matrix, and one entry per order/equivalence axiom.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub axioms: AxiomReport,
    /// `reductions[i][j]` = (task i reduces to task j).
    pub reductions: Vec<Vec<bool>>,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Machine-check the ordering axioms on a concrete task set: reflexivity,
/// antisymmetry, transitivity of reduction; the equivalence-relation axioms;
/// and irreflexivity/asymmetry of strict reduction. Refuses when the
/// propositions' hypotheses (identity + closure) fail.
pub fn partial_order_audit(
    tasks: &[TaskSpec],
    spaces: &IndexedSpaces,
    admissible_families: &[Vec<Policy>],
) -> Result<AuditReport> {
    let n = tasks.len();
    if n == 0 {
        return Err(Error::Config("audit needs at least one task".into()));
    }
    if spaces.n_tasks != n || admissible_families.len() != n {
        return Err(Error::Config("spaces/families do not match the task count".into()));
    }
    let axioms = verify_space_axioms(spaces)?;
    if !axioms.hypotheses_hold() {
        return Err(Error::Hypothesis(
            "identity or closure fails, so the ordering propositions' guarantees do not apply"
                .into(),
        ));
    }

    let mut reductions = vec![vec![false; n]; n];
    for (i, row) in reductions.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let verdict = check_reduction(
                &tasks[i],
                &tasks[j],
                &spaces.encoders[i][j],
                &spaces.decoders[j][i],
                &admissible_families[j],
            )?;
            *slot = verdict.holds;
        }
    }

    let r = &reductions;
    let equiv = |i: usize, j: usize| r[i][j] && r[j][i];
    let strict = |i: usize, j: usize| r[i][j] && !equiv(i, j);

    let mut checks = Vec::new();
    let mut push = |name: &'static str, violations: Vec<String>| {
        checks.push(AuditCheck { name, passed: violations.is_empty(), violations });
    };

    let mut v = Vec::new();
    for i in 0..n {
        if !r[i][i] {
            v.push(format!("task {i}"));
        }
    }
    push("reduction reflexivity", v);

    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if strict(i, j) && r[j][i] {
                v.push(format!("pair ({i}, {j})"));
            }
        }
    }
    push("reduction antisymmetry", v);

    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if r[i][j] && r[j][k] && !r[i][k] {
                    v.push(format!("triple ({i}, {j}, {k})"));
                }
            }
        }
    }
    push("reduction transitivity", v);

    let mut v = Vec::new();
    for i in 0..n {
        if !equiv(i, i) {
            v.push(format!("task {i}"));
        }
    }
    push("equivalence reflexivity", v);

    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if equiv(i, j) && !equiv(j, i) {
                v.push(format!("pair ({i}, {j})"));
            }
        }
    }
    push("equivalence symmetry", v);

    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if equiv(i, j) && equiv(j, k) && !equiv(i, k) {
                    v.push(format!("triple ({i}, {j}, {k})"));
                }
            }
        }
    }
    push("equivalence transitivity", v);

    let mut v = Vec::new();
    for i in 0..n {
        if strict(i, i) {
            v.push(format!("task {i}"));
        }
    }
    push("strict irreflexivity", v);

    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if strict(i, j) && strict(j, i) {
                v.push(format!("pair ({i}, {j})"));
            }
        }
    }
    push("strict asymmetry", v);

    Ok(AuditReport { axioms, reductions, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::function_space::FunctionSpace;
    use crate::reduction::maps::{Decoder, Encoder};
    use crate::taskcore::TabularModel;

    fn all_maps(size: usize) -> Vec<FiniteMap> {
        // All size^size functions on a domain of the given size.
        let mut out = Vec::new();
        let total = size.pow(size as u32);
        for mut code in 0..total {
            let mut table = Vec::with_capacity(size);
            for _ in 0..size {
                table.push(code % size);
                code /= size;
            }
            out.push(FiniteMap::from_table(table, size).unwrap());
        }
        out
    }

    #[test]
    fn full_function_space_is_closed_with_identity() {
        let enc = EncoderSpace::from_tables(all_maps(2)).unwrap();
        let dec = DecoderSpace::from_tables(all_maps(2)).unwrap();
        let spaces = IndexedSpaces::uniform(2, enc, dec);
        let report = verify_space_axioms(&spaces).unwrap();
        assert!(report.hypotheses_hold());
        assert!(report.compositions_checked > 0);
    }

    #[test]
    fn rotation_family_is_closed_with_identity() {
        // Maps {x -> x + k mod 4}: closed, contains identity at k = 0.
        let rotations: Vec<FiniteMap> = (0..4)
            .map(|k| {
                FiniteMap::from_table((0..4).map(|i| (i + k) % 4).collect(), 4).unwrap()
            })
            .collect();
        let enc = EncoderSpace::from_tables(rotations.clone()).unwrap();
        let dec = DecoderSpace::from_tables(rotations).unwrap();
        let spaces = IndexedSpaces::uniform(3, enc, dec);
        let report = verify_space_axioms(&spaces).unwrap();
        assert!(report.hypotheses_hold());
    }

    #[test]
    fn missing_identity_is_flagged_and_audit_refuses() {
        let swap_only = vec![FiniteMap::from_table(vec![1, 0], 2).unwrap()];
        let enc = EncoderSpace::from_tables(swap_only.clone()).unwrap();
        let dec = DecoderSpace::from_tables(swap_only).unwrap();
        let spaces = IndexedSpaces::uniform(1, enc, dec);
        let report = verify_space_axioms(&spaces).unwrap();
        assert!(!report.hypotheses_hold());
        assert!(report.identity.iter().any(|e| !e.identity_present));

        // The downstream audit is inapplicable and refuses.
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]; 2],
            sensor: vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            reward: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            init: vec![(0, 0.5), (1, 0.5)],
            terminal: vec![false, false],
        };
        let task = TaskSpec::tabular("t", 2, 2, 2, model, 1.0, 1).unwrap();
        let family = vec![Policy::tabular(vec![0, 0], 2).unwrap()];
        let out = partial_order_audit(&[task], &spaces, &[family]);
        assert!(matches!(out, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn single_task_identity_audit() {
        // tau <= tau passes; tau < tau fails as required (irreflexivity).
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![1.0, 0.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        let task = TaskSpec::tabular("t", 1, 2, 1, model, 1.0, 1).unwrap();
        let enc = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let dec = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let spaces = IndexedSpaces::uniform(1, enc, dec);
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let report = partial_order_audit(&[task], &spaces, &[family]).unwrap();
        assert!(report.all_passed(), "{:?}", report.checks);
        assert!(report.reductions[0][0]);
    }

    #[test]
    fn cyclic_relabelings_are_mutually_equivalent() {
        // Three relabelings of one 2-observation task; with full function
        // spaces every pair reduces both ways, consistent with antisymmetry.
        let make = |swap: bool| {
            let (o0, o1) = if swap { (1, 0) } else { (0, 1) };
            let mut sensor = vec![Vec::new(), Vec::new()];
            sensor[0] = vec![(o0, 1.0)];
            sensor[1] = vec![(o1, 1.0)];
            let model = TabularModel {
                transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]; 2],
                sensor,
                reward: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                init: vec![(0, 0.5), (1, 0.5)],
                terminal: vec![false, false],
            };
            TaskSpec::tabular(format!("relabel-{swap}"), 2, 2, 2, model, 1.0, 1).unwrap()
        };
        let tasks = vec![make(false), make(true), make(false)];
        let enc = EncoderSpace::from_tables(all_maps(2)).unwrap();
        let dec = DecoderSpace::from_tables(all_maps(2)).unwrap();
        let spaces = IndexedSpaces::uniform(3, enc, dec);
        let families: Vec<Vec<Policy>> = tasks
            .iter()
            .map(|t| {
                crate::taskcore::enumerate_admissible(t, crate::taskcore::Candidates::FullEnumeration)
                    .unwrap()
            })
            .collect();
        assert!(families.iter().all(|f| !f.is_empty()));
        let report = partial_order_audit(&tasks, &spaces, &families).unwrap();
        assert!(report.all_passed(), "{:?}", report.checks);
        for i in 0..3 {
            for j in 0..3 {
                assert!(report.reductions[i][j], "expected ({i}) <= ({j})");
            }
        }
    }
}
