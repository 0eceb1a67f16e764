//! User-community membership network (bipartite 0/1 bi-adjacency).

use crate::error::Result;

/// Membership pairs held in both user-major and community-major compressed
/// form. Rows are sorted and deduplicated; the two views encode the same
/// pair set.
#[derive(Debug, Clone)]
pub struct MembershipNetwork {
    n_users: usize,
    n_communities: usize,
    user_ptr: Vec<usize>,
    user_adj: Vec<usize>,
    comm_ptr: Vec<usize>,
    comm_adj: Vec<usize>,
    n_memberships: usize,
}

impl MembershipNetwork {
    /// Builds from (user, community) pairs; duplicates collapse. Dimensions
    /// are explicit so that split subsets keep the full index space; the
    /// pair set may be empty (splits can produce empty partitions).
    pub fn from_pairs(
        n_users: usize,
        n_communities: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize)> = pairs.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut user_ptr = vec![0usize; n_users + 1];
        let mut comm_ptr = vec![0usize; n_communities + 1];
        for &(u, k) in &sorted {
            assert!(
                u < n_users && k < n_communities,
                "membership ({u},{k}) out of bounds"
            );
            user_ptr[u + 1] += 1;
            comm_ptr[k + 1] += 1;
        }
        for i in 0..n_users {
            user_ptr[i + 1] += user_ptr[i];
        }
        for k in 0..n_communities {
            comm_ptr[k + 1] += comm_ptr[k];
        }
        let user_adj: Vec<usize> = sorted.iter().map(|&(_, k)| k).collect();
        let mut comm_adj = vec![0usize; sorted.len()];
        let mut cursor = comm_ptr.clone();
        for &(u, k) in &sorted {
            comm_adj[cursor[k]] = u;
            cursor[k] += 1;
        }
        let n_memberships = sorted.len();
        Ok(MembershipNetwork {
            n_users,
            n_communities,
            user_ptr,
            user_adj,
            comm_ptr,
            comm_adj,
            n_memberships,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn n_memberships(&self) -> usize {
        self.n_memberships
    }

    /// δ_i: number of communities user `u` belongs to.
    pub fn user_degree(&self, u: usize) -> usize {
        self.user_ptr[u + 1] - self.user_ptr[u]
    }

    /// σ_k: number of members of community `k`.
    pub fn community_size(&self, k: usize) -> usize {
        self.comm_ptr[k + 1] - self.comm_ptr[k]
    }

    /// Sorted community list of user `u`.
    pub fn communities_of(&self, u: usize) -> &[usize] {
        &self.user_adj[self.user_ptr[u]..self.user_ptr[u + 1]]
    }

    /// Sorted member list of community `k`.
    pub fn members_of(&self, k: usize) -> &[usize] {
        &self.comm_adj[self.comm_ptr[k]..self.comm_ptr[k + 1]]
    }

    pub fn contains(&self, u: usize, k: usize) -> bool {
        self.communities_of(u).binary_search(&k).is_ok()
    }

    pub fn iter_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_users).flat_map(move |u| self.communities_of(u).iter().map(move |&k| (u, k)))
    }

    pub fn is_empty(&self) -> bool {
        self.n_memberships == 0
    }
}
