use std::fmt;

/// Arena-backed ordered tree. Node 0 is the root; children keep insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedTree<L> {
    nodes: Vec<TreeNode<L>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TreeNode<L> {
    label: L,
    parent: Option<usize>,
    children: Vec<usize>,
}

impl<L> OrderedTree<L> {
    pub fn new(root: L) -> Self {
        OrderedTree {
            nodes: vec![TreeNode {
                label: root,
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    /// Appends `label` as the last child of `parent` and returns its id.
    pub fn add_child(&mut self, parent: usize, label: L) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            label,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, id: usize) -> &L {
        &self.nodes[id].label
    }

    pub fn label_mut(&mut self, id: usize) -> &mut L {
        &mut self.nodes[id].label
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root()];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev());
        }
        out
    }

    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root(), false)];
        while let Some((n, expanded)) = stack.pop() {
            if expanded {
                out.push(n);
            } else {
                stack.push((n, true));
                stack.extend(self.children(n).iter().rev().map(|&c| (c, false)));
            }
        }
        out
    }

    /// Removes the subtree rooted at `id` (not the root), returning a compacted tree.
    pub fn without_subtree(&self, id: usize) -> Self
    where
        L: Clone,
    {
        assert_ne!(id, self.root(), "cannot remove the root");
        let mut out = OrderedTree::new(self.label(self.root()).clone());
        let mut stack = vec![(self.root(), out.root())];
        while let Some((src, dst)) = stack.pop() {
            for &c in self.children(src) {
                if c != id {
                    let copy = out.add_child(dst, self.label(c).clone());
                    stack.push((c, copy));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Table,
    Thead,
    Tbody,
    Tr,
    Td,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Table => "table",
            Tag::Thead => "thead",
            Tag::Tbody => "tbody",
            Tag::Tr => "tr",
            Tag::Td => "td",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Structure-only node label. Spans are meaningful on `td` only and default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeLabel {
    pub tag: Tag,
    pub colspan: u32,
    pub rowspan: u32,
}

impl NodeLabel {
    pub fn tag(tag: Tag) -> Self {
        NodeLabel {
            tag,
            colspan: 1,
            rowspan: 1,
        }
    }

    pub fn cell(rowspan: u32, colspan: u32) -> Self {
        NodeLabel {
            tag: Tag::Td,
            colspan,
            rowspan,
        }
    }

    pub fn is_spanning(&self) -> bool {
        self.tag == Tag::Td && (self.colspan > 1 || self.rowspan > 1)
    }
}

pub type TableTree = OrderedTree<NodeLabel>;

impl TableTree {
    /// Serializes back to compact structure-only HTML.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        self.write_html(self.root(), &mut out);
        out
    }

    fn write_html(&self, id: usize, out: &mut String) {
        let l = self.label(id);
        out.push('<');
        out.push_str(l.tag.as_str());
        if l.tag == Tag::Td {
            if l.colspan > 1 {
                out.push_str(&format!(" colspan=\"{}\"", l.colspan));
            }
            if l.rowspan > 1 {
                out.push_str(&format!(" rowspan=\"{}\"", l.rowspan));
            }
        }
        out.push('>');
        for &c in self.children(id) {
            self.write_html(c, out);
        }
        out.push_str("</");
        out.push_str(l.tag.as_str());
        out.push('>');
    }

    /// True when any cell spans more than one row or column.
    pub fn is_complex(&self) -> bool {
        (0..self.len()).any(|i| self.label(i).is_spanning())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> OrderedTree<char> {
        // a(b(d, e), c)
        let mut t = OrderedTree::new('a');
        let b = t.add_child(0, 'b');
        t.add_child(0, 'c');
        t.add_child(b, 'd');
        t.add_child(b, 'e');
        t
    }

    #[test]
    fn traversals() {
        let t = sample();
        let labels = |ids: Vec<usize>| ids.into_iter().map(|i| *t.label(i)).collect::<String>();
        assert_eq!(labels(t.preorder()), "abdec");
        assert_eq!(labels(t.postorder()), "debca");
    }

    #[test]
    fn subtree_removal_keeps_order() {
        let t = sample();
        let b = t.children(0)[0];
        let pruned = t.without_subtree(t.children(b)[0]);
        let labels: String = pruned.preorder().into_iter().map(|i| *pruned.label(i)).collect();
        assert_eq!(labels, "abec");
        let pruned = t.without_subtree(b);
        assert_eq!(pruned.len(), 2);
    }
}
