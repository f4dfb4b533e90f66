//! Compressed revision tree and branch view.
//!
//! Adjacent revisions (parent and child) with the same scope-tree hash are
//! bundled into one group. Groups are connected subtrees; a group inherits
//! the children of all its members.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::revision::{RevisionId, RevisionStore, StoreError};
use crate::scope::{ScopeHash, ScopeNode};

pub type GroupId = u32;

/// The fields of a revision that compression looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub id: RevisionId,
    pub parent: Option<RevisionId>,
    pub seq: u64,
    pub sst_hash: ScopeHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupNode {
    pub id: GroupId,
    /// In commit order.
    pub members: Vec<RevisionId>,
    pub sst_hash: ScopeHash,
    /// Ordered by the commit order of the revision that starts each child group.
    pub children: Vec<GroupId>,
    /// Multi-member group currently shown as a single node.
    pub collapsed: bool,
}

/// Groups that the user expanded.
pub type ExpandState = BTreeSet<GroupId>;

/// Partition the tree into equal-hash connected components.
///
/// Group ids follow the commit order of each group's first member, so ids
/// stay stable as the tree grows.
pub fn compress_tree(nodes: &[TreeNode]) -> Vec<GroupNode> {
    let mut order: Vec<&TreeNode> = nodes.iter().collect();
    order.sort_by_key(|n| n.seq);
    let mut group_of: HashMap<RevisionId, GroupId> = HashMap::with_capacity(nodes.len());
    let mut groups: Vec<GroupNode> = Vec::new();

    for node in order {
        let parent_group = node.parent.and_then(|p| group_of.get(&p).copied());
        let gid = match parent_group {
            Some(pg) if groups[pg as usize].sst_hash == node.sst_hash => pg,
            _ => {
                let gid = groups.len() as GroupId;
                groups.push(GroupNode {
                    id: gid,
                    members: Vec::new(),
                    sst_hash: node.sst_hash,
                    children: Vec::new(),
                    collapsed: false,
                });
                if let Some(pg) = parent_group {
                    groups[pg as usize].children.push(gid);
                }
                gid
            }
        };
        groups[gid as usize].members.push(node.id);
        group_of.insert(node.id, gid);
    }
    for g in &mut groups {
        g.collapsed = g.members.len() > 1;
    }
    groups
}

/// Mark expanded groups as not collapsed.
pub fn apply_expand_state(groups: &mut [GroupNode], expanded: &ExpandState) {
    for g in groups {
        g.collapsed = g.members.len() > 1 && !expanded.contains(&g.id);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeColor {
    Blue,
    Grey,
}

/// One row of the branch display: a collapsed bundle of revisions or a single
/// revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchRow {
    pub group: GroupId,
    /// On-branch revisions shown in this row, in commit order.
    pub revisions: Vec<RevisionId>,
    /// One image reference per revision.
    pub images: Vec<String>,
    /// Scope tree shown once for the row.
    pub sst: Option<ScopeNode>,
    /// Variance image over the row's images, for rows with two or more.
    pub variance: Option<String>,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchView {
    pub head: RevisionId,
    pub current: RevisionId,
    /// Root first.
    pub rows: Vec<BranchRow>,
    pub colors: BTreeMap<RevisionId, NodeColor>,
    pub collapsed_groups: Vec<GroupId>,
}

/// Everything the meta visualization needs for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeView {
    pub groups: Vec<GroupNode>,
    pub branch: Option<BranchView>,
}

/// Lookups supplied by the caller: scope trees and image references.
pub struct ViewSources<'a> {
    pub sst_of: &'a dyn Fn(&RevisionId) -> Option<ScopeNode>,
    pub image_ref: &'a dyn Fn(&RevisionId) -> String,
    pub variance_ref: &'a dyn Fn(GroupId) -> String,
}

/// Rows and colors for the branch ending at `head`, which passes through
/// `current`.
pub fn branch_view(
    store: &RevisionStore,
    groups: &[GroupNode],
    head: &RevisionId,
    current: &RevisionId,
    expanded: &ExpandState,
    sources: &ViewSources<'_>,
) -> Result<BranchView, StoreError> {
    let path = store.branch_path(head)?;
    if !path.contains(current) {
        return Err(StoreError::UnknownRevision(*current));
    }
    let group_of: HashMap<RevisionId, GroupId> = groups
        .iter()
        .flat_map(|g| g.members.iter().map(move |m| (*m, g.id)))
        .collect();

    let mut rows: Vec<BranchRow> = Vec::new();
    let mut segments: Vec<(GroupId, Vec<RevisionId>)> = Vec::new();
    for id in &path {
        let gid = group_of[id];
        match segments.last_mut() {
            Some((g, members)) if *g == gid => members.push(*id),
            _ => segments.push((gid, vec![*id])),
        }
    }
    for (gid, members) in segments {
        let is_expanded = expanded.contains(&gid);
        if is_expanded || members.len() == 1 {
            for id in members {
                rows.push(BranchRow {
                    group: gid,
                    images: vec![(sources.image_ref)(&id)],
                    sst: (sources.sst_of)(&id),
                    revisions: vec![id],
                    variance: None,
                    collapsed: false,
                });
            }
        } else {
            rows.push(BranchRow {
                group: gid,
                images: members.iter().map(|m| (sources.image_ref)(m)).collect(),
                sst: (sources.sst_of)(&members[0]),
                variance: Some((sources.variance_ref)(gid)),
                revisions: members,
                collapsed: true,
            });
        }
    }

    let on_path: BTreeSet<RevisionId> = path.iter().copied().collect();
    let colors = store
        .revisions()
        .map(|r| (r.id, if on_path.contains(&r.id) { NodeColor::Blue } else { NodeColor::Grey }))
        .collect();
    let collapsed_groups = groups
        .iter()
        .filter(|g| g.members.len() > 1 && !expanded.contains(&g.id))
        .map(|g| g.id)
        .collect();
    Ok(BranchView { head: *head, current: *current, rows, colors, collapsed_groups })
}

/// The newest revision in the subtree rooted at `id`; the branch shown for a
/// checked-out revision ends there.
pub fn branch_head(store: &RevisionStore, id: &RevisionId) -> Result<RevisionId, StoreError> {
    let mut best = Arc::clone(store.get(id)?);
    let mut stack = vec![*id];
    while let Some(next) = stack.pop() {
        for child in store.children(&next)? {
            let rev = store.get(&child)?;
            if rev.seq > best.seq {
                best = Arc::clone(rev);
            }
            stack.push(child);
        }
    }
    Ok(best.id)
}

/// Revisions of group `gid` that lie on the branch ending at `head`.
pub fn on_branch_members(store: &RevisionStore, group: &GroupNode, head: &RevisionId) -> Result<Vec<RevisionId>, StoreError> {
    let path: BTreeSet<RevisionId> = store.branch_path(head)?.into_iter().collect();
    Ok(group.members.iter().filter(|m| path.contains(m)).copied().collect())
}
