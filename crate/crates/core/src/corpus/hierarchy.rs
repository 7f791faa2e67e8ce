use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};

/// Checks that `path` has the form `/a`, `/a/b`, ... with non-empty segments.
pub fn validate_path(path: &str) -> Result<()> {
    let ok = path.len() > 1
        && path.starts_with('/')
        && path[1..].split('/').all(|seg| !seg.is_empty());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidLabel(path.to_string()))
    }
}

/// Number of segments: `/a` is depth 1, `/a/b` depth 2.
pub fn path_depth(path: &str) -> usize {
    path.matches('/').count()
}

/// Proper ancestors of a path, shallowest first.
pub fn ancestors(path: &str) -> impl Iterator<Item = &str> {
    path.match_indices('/')
        .skip(1)
        .map(move |(i, _)| &path[..i])
}

/// `a` equals `b` or is one of its ancestors.
pub fn is_ancestor_or_self(a: &str, b: &str) -> bool {
    b == a || (b.starts_with(a) && b.as_bytes().get(a.len()) == Some(&b'/'))
}

/// Adds every ancestor of every label; returns the closed set in lexicographic order.
pub fn close_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<String>> {
    let mut out = BTreeSet::new();
    for l in labels {
        let l = l.as_ref();
        validate_path(l)?;
        out.extend(ancestors(l).map(str::to_string));
        out.insert(l.to_string());
    }
    Ok(out.into_iter().collect())
}

/// Rooted tree of type labels with a lexicographic index.
///
/// The root is virtual: depth-1 labels such as `/person` are its children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeHierarchy {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    depth: Vec<usize>,
}

impl Default for TypeHierarchy {
    fn default() -> Self {
        TypeHierarchy::from_labels::<&str>(&[]).expect("empty hierarchy")
    }
}

impl TypeHierarchy {
    /// Builds the hierarchy over the ancestor closure of `labels`.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let nodes = close_labels(labels)?;
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut parent = Vec::with_capacity(nodes.len());
        let mut children = vec![Vec::new(); nodes.len()];
        let mut roots = Vec::new();
        let mut depth = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            depth.push(path_depth(n));
            let p = ancestors(n).last().map(|a| index[a]);
            match p {
                Some(p) => children[p].push(i),
                None => roots.push(i),
            }
            parent.push(p);
        }
        // Nodes are visited in index order, so child lists are already sorted.
        Ok(TypeHierarchy {
            nodes,
            index,
            parent,
            children,
            roots,
            depth,
        })
    }

    /// Number of labels, K.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn index_of(&self, path: &str) -> Option<usize> {
        self.index.get(path).copied()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Depth-1 labels, the children of the virtual root.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.children[i].is_empty()
    }

    /// Label indices of `labels`, sorted.
    pub fn indices<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Binary vector of length K with ones at the given labels.
    pub fn label_vector<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<u8>> {
        let mut v = vec![0; self.len()];
        for i in self.indices(labels)? {
            v[i] = 1;
        }
        Ok(v)
    }

    /// The labels plus all of their ancestors, in index order.
    pub fn normalize_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<String>> {
        let mut set = BTreeSet::new();
        for i in self.indices(labels)? {
            let mut cur = Some(i);
            while let Some(c) = cur {
                if !set.insert(c) {
                    break;
                }
                cur = self.parent[c];
            }
        }
        Ok(set.into_iter().map(|i| self.nodes[i].clone()).collect())
    }

    /// Whether an ancestor-closed label set lies on a single root-anchored path.
    pub fn is_clean<S: AsRef<str>>(&self, labels: &[S]) -> Result<bool> {
        let idx = self.indices(labels)?;
        if idx.is_empty() {
            return Err(Error::EmptyLabels);
        }
        let set: HashSet<usize> = idx.iter().copied().collect();
        if let Some(&orphan) = idx
            .iter()
            .find(|&&i| self.parent[i].is_some_and(|p| !set.contains(&p)))
        {
            return Err(Error::InvalidArgument(format!(
                "label set is not ancestor-closed: parent of {} missing",
                self.nodes[orphan]
            )));
        }
        // A closed set is a chain exactly when it holds one node per depth level.
        let deepest = idx.iter().map(|&i| self.depth[i]).max().unwrap();
        Ok(set.len() == deepest)
    }
}
