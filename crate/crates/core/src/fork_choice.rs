//! LMD-GHOST with stake weighting, larger-digest tie-breaking and an
//! optional transient proposer boost.

use std::collections::HashMap;

use crate::chain::{BlockStore, BlockTree, ChainError, CheckpointRef, Digest, NodeId, Registry};

pub type WeightMap = HashMap<Digest, f64>;

/// Stake of latest messages voting for `b` or one of its descendants.
pub fn weight(tree: &BlockTree, registry: &Registry, b: &Digest) -> Result<f64, ChainError> {
    let id = tree.node_of(b).ok_or(ChainError::UnknownBlock(*b))?;
    let store = tree.store().read();
    Ok(tree
        .pool()
        .iter()
        .filter(|e| store.is_ancestor(id, e.node))
        .map(|e| registry.weight(e.attestation.attester))
        .sum())
}

/// Weight of every held block, accumulated bottom-up in one pass.
pub fn weights(tree: &BlockTree, registry: &Registry) -> WeightMap {
    let store = tree.store().read();
    let mut w = vec![0.0f64; store.len()];
    for e in tree.pool().iter() {
        w[e.node as usize] += registry.weight(e.attestation.attester);
    }
    accumulate_subtree_weights(&mut w, |i| {
        let id = i as NodeId;
        if id > 0 && tree.knows(id) {
            store.parent(id).map(|p| p as usize)
        } else {
            None
        }
    });
    (0..store.len() as NodeId)
        .filter(|&id| tree.knows(id))
        .map(|id| (store.hash(id), w[id as usize]))
        .collect()
}

/// Turns per-node weights into subtree weights in place. Every node's parent
/// must carry a smaller index; nodes mapped to `None` are not propagated.
pub fn accumulate_subtree_weights(w: &mut [f64], parent: impl Fn(usize) -> Option<usize>) {
    for i in (0..w.len()).rev() {
        if let Some(p) = parent(i) {
            debug_assert!(p < i);
            w[p] += w[i];
        }
    }
}

/// Fork-choice head starting from the justified checkpoint's block.
pub fn get_head_block(tree: &BlockTree, registry: &Registry, justified: &CheckpointRef) -> Result<Digest, ChainError> {
    let root = tree.node_of(&justified.block).ok_or(ChainError::UnknownBlock(justified.block))?;
    let store = tree.store().read();
    Ok(store.hash(head_node(&store, tree, registry, root, None)))
}

/// Same as [`get_head_block`] with `rho_a` extra weight on `boosted` and its
/// ancestors for this query only.
pub fn get_head_with_boost(
    tree: &BlockTree,
    registry: &Registry,
    justified: &CheckpointRef,
    boosted: &Digest,
    rho_a: f64,
) -> Result<Digest, ChainError> {
    let root = tree.node_of(&justified.block).ok_or(ChainError::UnknownBlock(justified.block))?;
    let b = tree.node_of(boosted).ok_or(ChainError::UnknownBlock(*boosted))?;
    let store = tree.store().read();
    Ok(store.hash(head_node(&store, tree, registry, root, Some((b, rho_a)))))
}

/// GHOST descent over the view's leaves. Between forks the walk is a single
/// chain, so it jumps straight to the next fork point (the leaves' LCA) and
/// compares the subtrees hanging off it.
pub fn head_node(
    store: &BlockStore,
    tree: &BlockTree,
    registry: &Registry,
    root: NodeId,
    boost: Option<(NodeId, f64)>,
) -> NodeId {
    let mut cands: Vec<NodeId> =
        tree.leaves().iter().copied().filter(|&l| store.is_ancestor(root, l)).collect();
    loop {
        match cands.len() {
            0 => return root,
            1 => return cands[0],
            _ => {}
        }
        let fork = cands[1..].iter().fold(cands[0], |acc, &l| store.lca(acc, l));
        let d = store.depth(fork) + 1;
        let mut groups: Vec<(NodeId, f64, Vec<NodeId>)> = Vec::new();
        for &l in &cands {
            let c = store.ancestor_at_depth(l, d);
            match groups.iter_mut().find(|g| g.0 == c) {
                Some(g) => g.2.push(l),
                None => groups.push((c, 0.0, vec![l])),
            }
        }
        for e in tree.pool().iter() {
            if store.depth(e.node) >= d {
                let c = store.ancestor_at_depth(e.node, d);
                if let Some(g) = groups.iter_mut().find(|g| g.0 == c) {
                    g.1 += registry.weight(e.attestation.attester);
                }
            }
        }
        if let Some((b, rho_a)) = boost {
            if store.depth(b) >= d {
                let c = store.ancestor_at_depth(b, d);
                if let Some(g) = groups.iter_mut().find(|g| g.0 == c) {
                    g.1 += rho_a;
                }
            }
        }
        let best = groups
            .into_iter()
            .max_by(|x, y| x.1.total_cmp(&y.1).then_with(|| store.hash(x.0).cmp(&store.hash(y.0))))
            .expect("at least two candidates");
        cands = best.2;
    }
}
