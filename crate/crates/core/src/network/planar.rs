//! Planarity testing and face enumeration.
//!
//! Planarity is decided per biconnected block with the path-addition
//! embedding algorithm of Demoucron, Malgrange and Pertuiset, which also
//! yields the faces of an embedding. When vertex coordinates are supplied and
//! their straight-line drawing has no crossings, faces are read off the
//! drawing instead so that they agree with the picture.

use std::collections::{BTreeSet, HashSet, VecDeque};

pub type Edge = (usize, usize);

fn norm_edge(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

/// Edge sets of the biconnected blocks, found with an iterative
/// Hopcroft-Tarjan search over every connected component.
pub fn biconnected_blocks(n: usize, edges: &[Edge]) -> Vec<Vec<Edge>> {
    let adj = adjacency(n, edges);
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    let mut blocks = Vec::new();
    let mut edge_stack: Vec<Edge> = Vec::new();

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, parent, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (v, parent, ref mut pos)) = stack.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if w == parent {
                    continue;
                }
                if disc[w] == usize::MAX {
                    edge_stack.push(norm_edge(v, w));
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    stack.push((w, v, 0));
                } else if disc[w] < disc[v] {
                    edge_stack.push(norm_edge(v, w));
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] >= disc[u] {
                        let target = norm_edge(u, v);
                        let mut block = Vec::new();
                        while let Some(e) = edge_stack.pop() {
                            block.push(e);
                            if e == target {
                                break;
                            }
                        }
                        block.sort_unstable();
                        blocks.push(block);
                    }
                }
            }
        }
    }
    blocks
}

fn block_vertices(block: &[Edge]) -> Vec<usize> {
    let mut vs: BTreeSet<usize> = BTreeSet::new();
    for &(u, v) in block {
        vs.insert(u);
        vs.insert(v);
    }
    vs.into_iter().collect()
}

/// A simple cycle through the first edge of a biconnected block.
fn find_cycle(n: usize, block: &[Edge]) -> Vec<usize> {
    let adj = adjacency(n, block);
    let (u, v) = block[0];
    // shortest u -> v path that avoids the edge (u, v)
    let mut prev = vec![usize::MAX; n];
    prev[u] = u;
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        if x == v {
            break;
        }
        for &y in &adj[x] {
            if (x == u && y == v) || prev[y] != usize::MAX {
                continue;
            }
            prev[y] = x;
            queue.push_back(y);
        }
    }
    assert!(prev[v] != usize::MAX, "block edge lies on a cycle");
    let mut cycle = vec![v];
    let mut x = v;
    while x != u {
        x = prev[x];
        cycle.push(x);
    }
    cycle
}

struct Fragment {
    attachments: Vec<usize>,
    /// Interior vertices (empty for a single chord edge).
    interior: Vec<usize>,
}

/// Embed one biconnected block; `None` if it is not planar.
fn embed_block(n: usize, block: &[Edge]) -> Option<Vec<Vec<usize>>> {
    let verts = block_vertices(block);
    if block.len() < 2 {
        return Some(Vec::new());
    }
    let adj = adjacency(n, block);
    let cycle = find_cycle(n, block);
    let mut in_h = vec![false; n];
    let mut embedded: HashSet<Edge> = HashSet::new();
    for (i, &v) in cycle.iter().enumerate() {
        in_h[v] = true;
        embedded.insert(norm_edge(v, cycle[(i + 1) % cycle.len()]));
    }
    let mut faces = vec![cycle.clone(), cycle];

    while embedded.len() < block.len() {
        // fragments relative to the embedded subgraph
        let mut fragments: Vec<Fragment> = Vec::new();
        for &(u, v) in block {
            if in_h[u] && in_h[v] && !embedded.contains(&(u, v)) {
                fragments.push(Fragment { attachments: vec![u, v], interior: Vec::new() });
            }
        }
        let mut seen = vec![false; n];
        for &s in &verts {
            if in_h[s] || seen[s] {
                continue;
            }
            let mut comp = Vec::new();
            let mut att: BTreeSet<usize> = BTreeSet::new();
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(x) = queue.pop_front() {
                comp.push(x);
                for &y in &adj[x] {
                    if in_h[y] {
                        att.insert(y);
                    } else if !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            fragments.push(Fragment { attachments: att.into_iter().collect(), interior: comp });
        }

        let admissible = |f: &Fragment| -> Vec<usize> {
            faces
                .iter()
                .enumerate()
                .filter(|(_, face)| f.attachments.iter().all(|a| face.contains(a)))
                .map(|(i, _)| i)
                .collect()
        };
        let mut choice: Option<(usize, usize)> = None;
        for (fi, f) in fragments.iter().enumerate() {
            let adm = admissible(f);
            if adm.is_empty() {
                return None;
            }
            if adm.len() == 1 {
                choice = Some((fi, adm[0]));
                break;
            }
            if choice.is_none() {
                choice = Some((fi, adm[0]));
            }
        }
        let (fi, face_idx) = choice.expect("at least one fragment remains");
        let frag = &fragments[fi];

        // a path through the fragment between two distinct attachments
        let path: Vec<usize> = if frag.interior.is_empty() {
            frag.attachments.clone()
        } else {
            let inside: HashSet<usize> = frag.interior.iter().copied().collect();
            let a1 = frag.attachments[0];
            let entry = *adj[a1].iter().find(|w| inside.contains(w)).expect("attachment touches fragment");
            let mut prev = vec![usize::MAX; n];
            let mut queue = VecDeque::from([entry]);
            prev[entry] = entry;
            let mut end = None;
            'bfs: while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if in_h[y] && y != a1 {
                        end = Some((x, y));
                        break 'bfs;
                    }
                    if inside.contains(&y) && prev[y] == usize::MAX {
                        prev[y] = x;
                        queue.push_back(y);
                    }
                }
            }
            let (last, a2) = end.expect("biconnected fragment has two attachments");
            let mut inner = vec![last];
            let mut x = last;
            while x != entry {
                x = prev[x];
                inner.push(x);
            }
            inner.reverse();
            let mut p = vec![a1];
            p.extend(inner);
            p.push(a2);
            p
        };

        let face = faces.swap_remove(face_idx);
        let k = face.len();
        let a1 = path[0];
        let a2 = *path.last().unwrap();
        let i = face.iter().position(|&x| x == a1).unwrap();
        let j = face.iter().position(|&x| x == a2).unwrap();
        let interior = &path[1..path.len() - 1];
        let mut f1: Vec<usize> = Vec::new();
        let mut t = i;
        loop {
            f1.push(face[t]);
            if t == j {
                break;
            }
            t = (t + 1) % k;
        }
        f1.extend(interior.iter().rev());
        let mut f2: Vec<usize> = Vec::new();
        let mut t = j;
        loop {
            f2.push(face[t]);
            if t == i {
                break;
            }
            t = (t + 1) % k;
        }
        f2.extend(interior.iter());
        faces.push(f1);
        faces.push(f2);
        for w in path.windows(2) {
            embedded.insert(norm_edge(w[0], w[1]));
        }
        for &v in &path {
            in_h[v] = true;
        }
    }
    Some(faces)
}

/// Whether the graph is planar.
pub fn is_planar(n: usize, edges: &[Edge]) -> bool {
    biconnected_blocks(n, edges).iter().all(|b| embed_block(n, b).is_some())
}

/// A minimal non-planar edge subset (a Kuratowski subdivision), or `None`
/// if the graph is planar.
pub fn kuratowski_certificate(n: usize, edges: &[Edge]) -> Option<Vec<Edge>> {
    if is_planar(n, edges) {
        return None;
    }
    let mut keep: Vec<Edge> = edges.to_vec();
    let mut i = 0;
    while i < keep.len() {
        let mut trial = keep.clone();
        trial.remove(i);
        if !is_planar(n, &trial) {
            keep = trial;
        } else {
            i += 1;
        }
    }
    Some(keep)
}

fn signed_area(face: &[usize], coords: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for (i, &v) in face.iter().enumerate() {
        let w = face[(i + 1) % face.len()];
        a += coords[v][0] * coords[w][1] - coords[w][0] * coords[v][1];
    }
    0.5 * a
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        let v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if v.abs() < 1e-12 {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    // collinear overlap
    let on_seg = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        c[0] > a[0].min(b[0]) + 1e-12
            && c[0] < a[0].max(b[0]) - 1e-12
            || c[1] > a[1].min(b[1]) + 1e-12 && c[1] < a[1].max(b[1]) - 1e-12
    };
    (o1 == 0 && on_seg(p1, p2, q1))
        || (o2 == 0 && on_seg(p1, p2, q2))
        || (o3 == 0 && on_seg(q1, q2, p1))
        || (o4 == 0 && on_seg(q1, q2, p2))
}

/// Whether the straight-line drawing of `edges` has any crossing.
pub fn drawing_has_crossings(edges: &[Edge], coords: &[[f64; 2]]) -> bool {
    for (i, &(a, b)) in edges.iter().enumerate() {
        for &(c, d) in &edges[i + 1..] {
            if a == c || a == d || b == c || b == d {
                continue;
            }
            if segments_cross(coords[a], coords[b], coords[c], coords[d]) {
                return true;
            }
        }
    }
    false
}

fn faces_from_drawing(n: usize, block: &[Edge], coords: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let adj = adjacency(n, block);
    let mut rot: Vec<Vec<usize>> = adj.clone();
    for (v, nbrs) in rot.iter_mut().enumerate() {
        nbrs.sort_by(|&a, &b| {
            let ta = (coords[a][1] - coords[v][1]).atan2(coords[a][0] - coords[v][0]);
            let tb = (coords[b][1] - coords[v][1]).atan2(coords[b][0] - coords[v][0]);
            ta.total_cmp(&tb)
        });
    }
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut faces = Vec::new();
    for &(a, b) in block {
        for (u, v) in [(a, b), (b, a)] {
            if used.contains(&(u, v)) {
                continue;
            }
            let mut face = Vec::new();
            let (mut x, mut y) = (u, v);
            while used.insert((x, y)) {
                face.push(x);
                // next edge: predecessor of x in y's counter-clockwise order
                let r = &rot[y];
                let p = r.iter().position(|&z| z == x).unwrap();
                let w = r[(p + r.len() - 1) % r.len()];
                x = y;
                y = w;
            }
            faces.push(face);
        }
    }
    faces
}

/// Interior faces of a planar embedding as vertex cycles.
///
/// Faces are computed per biconnected block and the outer face of each
/// block is dropped, so the count equals `|E| - |V| + 1` for a connected
/// planar graph. Returns `Err(certificate)` for non-planar input.
pub fn interior_faces(
    n: usize,
    edges: &[Edge],
    coords: Option<&[[f64; 2]]>,
) -> Result<Vec<Vec<usize>>, Vec<Edge>> {
    let mut out = Vec::new();
    for block in biconnected_blocks(n, edges) {
        if block.len() < 3 {
            continue;
        }
        let geometric = coords.filter(|c| !drawing_has_crossings(&block, c));
        let mut faces = match geometric {
            Some(c) => faces_from_drawing(n, &block, c),
            None => match embed_block(n, &block) {
                Some(f) => f,
                None => return Err(kuratowski_certificate(n, edges).unwrap_or_default()),
            },
        };
        // drop the outer face
        let outer = match geometric {
            Some(c) => {
                let mut best = 0;
                for i in 1..faces.len() {
                    if signed_area(&faces[i], c).abs() > signed_area(&faces[best], c).abs() {
                        best = i;
                    }
                }
                best
            }
            None => {
                let mut best = 0;
                for i in 1..faces.len() {
                    if faces[i].len() >= faces[best].len() {
                        best = i;
                    }
                }
                best
            }
        };
        faces.remove(outer);
        out.extend(faces);
    }
    Ok(out)
}
