//! Edge-list and membership text files: whitespace-separated token pairs,
//! one per line, `#` comments, blank lines ignored.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CasoError, Result};
use crate::graph::{IdMap, SocialGraph};
use crate::membership::MembershipNetwork;

/// Source stamp of a loaded or generated dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub graph_path: String,
    pub membership_path: String,
    /// SHA-256 over both files' bytes, each length-prefixed.
    pub content_hash: String,
}

/// Graph and memberships over one shared user index space. Users that
/// appear only in the membership file are appended as isolated graph
/// nodes, so every membership user has a (possibly empty) neighborhood.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub graph: SocialGraph,
    pub memberships: MembershipNetwork,
    pub user_ids: IdMap,
    pub community_ids: IdMap,
    pub provenance: Provenance,
}

fn parse_pairs(label: &str, text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(CasoError::parse(
                label,
                idx + 1,
                format!("expected two whitespace-separated tokens, got '{line}'"),
            ));
        };
        pairs.push((a.to_string(), b.to_string()));
    }
    Ok(pairs)
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

/// Edge token pairs in file order. Empty (or all-comment) files error.
pub fn load_edge_list(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let pairs = parse_pairs(&label(path), &text)?;
    if pairs.is_empty() {
        return Err(CasoError::EmptyGraph);
    }
    Ok(pairs)
}

/// (user, community) token pairs in file order. Empty files error.
pub fn load_memberships(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let pairs = parse_pairs(&label(path), &text)?;
    if pairs.is_empty() {
        return Err(CasoError::EmptyMembershipNetwork);
    }
    Ok(pairs)
}

/// Hex SHA-256 over both byte strings, each prefixed with its length so
/// moving bytes across the file boundary changes the digest.
pub fn content_hash(graph_bytes: &[u8], membership_bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    for part in [graph_bytes, membership_bytes] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Loads both files and builds the shared-index bundle. User indices are
/// assigned by first appearance in the edge list, then by first
/// appearance among membership users not already seen.
pub fn load_dataset(graph_path: &Path, membership_path: &Path) -> Result<DatasetBundle> {
    let graph_text = fs::read_to_string(graph_path)?;
    let membership_text = fs::read_to_string(membership_path)?;
    let edge_tokens = parse_pairs(&label(graph_path), &graph_text)?;
    if edge_tokens.is_empty() {
        return Err(CasoError::EmptyGraph);
    }
    let membership_tokens = parse_pairs(&label(membership_path), &membership_text)?;
    if membership_tokens.is_empty() {
        return Err(CasoError::EmptyMembershipNetwork);
    }

    let mut user_ids = IdMap::new();
    let mut edges = Vec::with_capacity(edge_tokens.len());
    for (a, b) in &edge_tokens {
        edges.push((user_ids.get_or_insert(a), user_ids.get_or_insert(b)));
    }
    let mut community_ids = IdMap::new();
    let mut pairs = Vec::with_capacity(membership_tokens.len());
    for (u, k) in &membership_tokens {
        pairs.push((user_ids.get_or_insert(u), community_ids.get_or_insert(k)));
    }

    let (graph, _) = SocialGraph::from_edges(user_ids.len(), edges)?;
    let memberships =
        MembershipNetwork::from_pairs(user_ids.len(), community_ids.len(), pairs)?;
    Ok(DatasetBundle {
        graph,
        memberships,
        user_ids,
        community_ids,
        provenance: Provenance {
            graph_path: label(graph_path),
            membership_path: label(membership_path),
            content_hash: content_hash(graph_text.as_bytes(), membership_text.as_bytes()),
        },
    })
}

/// Canonical edge-list text: one `u v` line per edge with u < v, in
/// ascending order. Indices double as tokens.
pub fn edge_list_text(graph: &SocialGraph) -> String {
    let mut out = String::new();
    for u in 0..graph.n_users() {
        for &v in graph.neighbors(u) {
            if v > u {
                out.push_str(&format!("{u} {v}\n"));
            }
        }
    }
    out
}

/// Canonical membership text: one `user community` line per pair, in
/// ascending (user, community) order.
pub fn membership_text(memberships: &MembershipNetwork) -> String {
    let mut out = String::new();
    for (u, k) in memberships.iter_pairs() {
        out.push_str(&format!("{u} {k}\n"));
    }
    out
}

/// Writes `graph.txt` and `memberships.txt` under `dir` (created if
/// missing) and returns the provenance of the written pair. The text is
/// canonical, so identical inputs always produce the identical hash.
pub fn write_dataset(
    dir: &Path,
    graph: &SocialGraph,
    memberships: &MembershipNetwork,
) -> Result<Provenance> {
    fs::create_dir_all(dir)?;
    let graph_path: PathBuf = dir.join("graph.txt");
    let membership_path: PathBuf = dir.join("memberships.txt");
    let graph_text = edge_list_text(graph);
    let membership_text = membership_text(memberships);
    fs::write(&graph_path, &graph_text)?;
    fs::write(&membership_path, &membership_text)?;
    Ok(Provenance {
        graph_path: label(&graph_path),
        membership_path: label(&membership_path),
        content_hash: content_hash(graph_text.as_bytes(), membership_text.as_bytes()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn write_temp(dir: &tempfile::TempDir, name: &str, content: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn parses_pairs_in_file_order() {
        let pairs = parse_pairs("t", "a b\nb c\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("a".to_string(), "b".to_string()),
                ("b".to_string(), "c".to_string())
            ]
        );
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let pairs = parse_pairs("t", "# comment\n1 2\n\n   \n# another\n3 4\r\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("1".to_string(), "2".to_string()),
                ("3".to_string(), "4".to_string())
            ]
        );
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let err = parse_pairs("edges.txt", "a b\nc\n").unwrap_err();
        assert_eq!(err.to_string(), "edges.txt:2: expected two whitespace-separated tokens, got 'c'");
        let err = parse_pairs("edges.txt", "a b c\n").unwrap_err();
        assert!(err.to_string().starts_with("edges.txt:1:"));
    }

    #[test]
    fn empty_files_error() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write_temp(&dir, "empty.txt", "");
        assert!(matches!(
            load_edge_list(&empty).unwrap_err(),
            CasoError::EmptyGraph
        ));
        assert!(matches!(
            load_memberships(&empty).unwrap_err(),
            CasoError::EmptyMembershipNetwork
        ));
        let comments = write_temp(&dir, "comments.txt", "# nothing here\n");
        assert!(matches!(
            load_edge_list(&comments).unwrap_err(),
            CasoError::EmptyGraph
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_edge_list(Path::new("/definitely/not/here.txt")).unwrap_err();
        assert!(matches!(err, CasoError::Io(_)));
    }

    #[test]
    fn edge_round_trip_preserves_per_user_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut edges = Vec::new();
        while edges.len() < 100 {
            let u = rng.random_range(0..40usize);
            let v = rng.random_range(0..40usize);
            if u != v {
                edges.push((u, v));
            }
        }
        let (original, _) = SocialGraph::from_edges(40, edges.clone()).unwrap();

        let text: String = edges
            .iter()
            .map(|(u, v)| format!("{u} {v}\n"))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let graph_path = write_temp(&dir, "g.txt", &text);
        let membership_text: String =
            (0..40).map(|u| format!("{u} 0\n")).collect();
        let membership_path = write_temp(&dir, "y.txt", &membership_text);

        let bundle = load_dataset(&graph_path, &membership_path).unwrap();
        assert_eq!(bundle.graph.n_edges(), original.n_edges());
        for idx in 0..bundle.graph.n_users() {
            let token: usize = bundle.user_ids.token(idx).parse().unwrap();
            assert_eq!(bundle.graph.degree(idx), original.degree(token));
        }
    }

    #[test]
    fn membership_round_trip_preserves_degrees_and_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let graph_path = write_temp(&dir, "g.txt", "a b\nb c\nc d\n");
        let membership_path =
            write_temp(&dir, "y.txt", "a x\na y\nb x\nc y\nd z\nd x\n");
        let bundle = load_dataset(&graph_path, &membership_path).unwrap();
        let expected_user = [("a", 2), ("b", 1), ("c", 1), ("d", 2)];
        for (token, delta) in expected_user {
            let idx = bundle.user_ids.get(token).unwrap();
            assert_eq!(bundle.memberships.user_degree(idx), delta, "user {token}");
        }
        let expected_comm = [("x", 3), ("y", 2), ("z", 1)];
        for (token, sigma) in expected_comm {
            let idx = bundle.community_ids.get(token).unwrap();
            assert_eq!(bundle.memberships.community_size(idx), sigma, "community {token}");
        }
    }

    #[test]
    fn membership_only_users_become_isolated_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let graph_path = write_temp(&dir, "g.txt", "a b\n");
        let membership_path = write_temp(&dir, "y.txt", "a x\nc y\n");
        let bundle = load_dataset(&graph_path, &membership_path).unwrap();
        assert_eq!(bundle.graph.n_users(), 3);
        let c = bundle.user_ids.get("c").unwrap();
        assert_eq!(bundle.graph.degree(c), 0);
        assert_eq!(bundle.memberships.user_degree(c), 1);
    }

    #[test]
    fn content_hash_is_stable_and_content_sensitive() {
        let h1 = content_hash(b"a b\n", b"a x\n");
        let h2 = content_hash(b"a b\n", b"a x\n");
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        assert!(h1.bytes().all(|b| b.is_ascii_hexdigit()));
        assert_ne!(h1, content_hash(b"a b\n", b"a y\n"));
        // The length prefix keeps boundary shifts distinguishable.
        assert_ne!(content_hash(b"ab", b"c"), content_hash(b"a", b"bc"));
    }

    #[test]
    fn written_dataset_reloads_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let edges: Vec<(usize, usize)> = (0..60)
            .map(|_| (rng.random_range(0..20), rng.random_range(0..20)))
            .filter(|(u, v)| u != v)
            .collect();
        let (graph, _) = SocialGraph::from_edges(20, edges).unwrap();
        let pairs: Vec<(usize, usize)> =
            (0..20).map(|u| (u, u % 4)).collect();
        let memberships = MembershipNetwork::from_pairs(20, 4, pairs).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let prov = write_dataset(dir.path(), &graph, &memberships).unwrap();
        let again = write_dataset(dir.path(), &graph, &memberships).unwrap();
        assert_eq!(prov, again, "rewriting the same data reproduces the hash");

        let bundle = load_dataset(
            Path::new(&prov.graph_path),
            Path::new(&prov.membership_path),
        )
        .unwrap();
        assert_eq!(bundle.provenance.content_hash, prov.content_hash);
        assert_eq!(bundle.graph.n_edges(), graph.n_edges());
        assert_eq!(bundle.memberships.n_memberships(), memberships.n_memberships());
        for idx in 0..bundle.graph.n_users() {
            let token: usize = bundle.user_ids.token(idx).parse().unwrap();
            assert_eq!(bundle.graph.degree(idx), graph.degree(token));
            assert_eq!(
                bundle.memberships.user_degree(idx),
                memberships.user_degree(token)
            );
        }
    }
}
