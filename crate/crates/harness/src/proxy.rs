//! Recording proxy placed on one edge of the cluster.

use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use taaroa_core::net::{bind, serve, Connection, ServerHandle, Service};
use taaroa_core::protocol::{
    parse_reply, render_reply, render_request, Component, ErrorCode, Reply, Request, RequestKind,
};

use crate::trace::{Role, Trace};

/// What a matching fault rule does instead of forwarding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultAction {
    /// Answer `ERR code` without contacting the server.
    Reply(ErrorCode),
    /// Forward after a pause.
    Delay(Duration),
}

#[derive(Debug, Clone)]
pub struct FaultRule {
    pub from: Option<Role>,
    pub to: Option<Role>,
    pub kind: RequestKind,
    pub action: FaultAction,
    /// How many more requests the rule applies to; `None` for all.
    pub remaining: Option<usize>,
}

impl FaultRule {
    pub fn reply(to: Role, kind: RequestKind, code: ErrorCode) -> Self {
        Self {
            from: None,
            to: Some(to),
            kind,
            action: FaultAction::Reply(code),
            remaining: None,
        }
    }

    pub fn times(mut self, n: usize) -> Self {
        self.remaining = Some(n);
        self
    }

    fn applies(&self, from: Role, to: Role, kind: RequestKind) -> bool {
        self.kind == kind
            && self.from.is_none_or(|f| f == from)
            && self.to.is_none_or(|t| t == to)
            && self.remaining != Some(0)
    }
}

/// Fault rules shared by all proxies of a cluster.
pub type Faults = Arc<Mutex<Vec<FaultRule>>>;

/// Called before each forwarded request; the result is stored with the
/// exchange.
pub type StateProbe = Arc<dyn Fn() -> String + Send + Sync>;

struct Relay {
    from: Role,
    to: Role,
    component: Component,
    target: String,
    trace: Trace,
    faults: Faults,
    probe: Option<StateProbe>,
}

impl Relay {
    fn fault(&self, kind: RequestKind) -> Option<FaultAction> {
        let mut rules = self.faults.lock().unwrap();
        let rule = rules
            .iter_mut()
            .find(|r| r.applies(self.from, self.to, kind))?;
        if let Some(n) = &mut rule.remaining {
            *n -= 1;
        }
        Some(rule.action.clone())
    }

    fn forward(&self, req: &Request) -> (Reply, Vec<u8>) {
        let result = Connection::open(&self.target).and_then(|mut c| {
            let raw = c.exchange(&render_request(req), req.kind().is_list())?;
            let reply = parse_reply(&raw, req.kind())?;
            Ok((reply, raw))
        });
        match result {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(target = %self.target, "proxy could not forward: {e}");
                let reply = Reply::Err(ErrorCode::UPSTREAM_FAILURE);
                let raw = render_reply(&reply);
                (reply, raw)
            }
        }
    }
}

impl Service for Relay {
    fn component(&self) -> Component {
        self.component
    }

    fn handle(&self, req: Request) -> Reply {
        let pending = self.trace.begin();
        let kind = req.kind();
        let (reply, raw, state, injected) = match self.fault(kind) {
            Some(FaultAction::Reply(code)) => {
                let reply = Reply::Err(code);
                let raw = render_reply(&reply);
                (reply, raw, None, true)
            }
            other => {
                if let Some(FaultAction::Delay(d)) = other {
                    std::thread::sleep(d);
                }
                let state = self.probe.as_ref().map(|p| p());
                let (reply, raw) = self.forward(&req);
                (reply, raw, state, false)
            }
        };
        self.trace.finish(
            pending,
            self.from,
            self.to,
            &req,
            reply.clone(),
            raw,
            state,
            injected,
        );
        reply
    }
}

/// A listening proxy for the edge `from -> to`.
pub struct Proxy {
    pub from: Role,
    pub to: Role,
    handle: ServerHandle,
}

impl Proxy {
    pub fn start(
        from: Role,
        to: Role,
        component: Component,
        target: SocketAddr,
        trace: Trace,
        faults: Faults,
        probe: Option<StateProbe>,
    ) -> io::Result<Self> {
        let relay = Relay {
            from,
            to,
            component,
            target: target.to_string(),
            trace,
            faults,
            probe,
        };
        let handle = serve(bind("127.0.0.1:0")?, relay)?;
        Ok(Self { from, to, handle })
    }

    pub fn addr(&self) -> SocketAddr {
        self.handle.local_addr()
    }

    pub fn shutdown(&mut self) {
        self.handle.shutdown();
    }
}
