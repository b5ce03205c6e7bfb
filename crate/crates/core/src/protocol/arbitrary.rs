//! proptest strategies producing well-formed messages of every kind.

use proptest::prelude::*;
use proptest::sample::select;

use super::message::*;
use super::{ErrorCode, ExecStatus, Quantity, UnitFamily};

/// A non-blank token free of blanks, CR and LF.
pub fn token() -> impl Strategy<Value = String> {
    "[A-Za-z0-9.:_-]{1,16}"
}

/// Contents of a base64 field: any non-empty text, separators included.
pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "(?s).{1,24}",
        "[ #\t\n\r.a-z]{1,12}",
    ]
}

pub fn real() -> impl Strategy<Value = f64> {
    prop_oneof![
        0.0..1.0f64,
        0.0..64.0f64,
        any::<f64>().prop_filter_map("finite", |v| {
            let v = v.abs();
            v.is_finite().then_some(v)
        }),
    ]
}

pub fn status() -> impl Strategy<Value = ExecStatus> {
    select(ExecStatus::ALL.to_vec())
}

pub fn quantity(family: UnitFamily) -> impl Strategy<Value = Quantity> {
    (any::<u64>(), select(family.units().to_vec())).prop_map(|(n, u)| Quantity::new(n, u))
}

fn id() -> impl Strategy<Value = u64> {
    prop_oneof![1..100u64, any::<u64>()]
}

pub fn error_code() -> impl Strategy<Value = ErrorCode> {
    prop_oneof![
        select(ErrorCode::REGISTRY.to_vec()),
        (1..=u32::MAX).prop_map(ErrorCode),
    ]
}

fn phy_mach_registration() -> impl Strategy<Value = PhyMachRegistration> {
    (
        (token(), text(), any::<u64>()),
        (
            quantity(UnitFamily::Frequency),
            quantity(UnitFamily::Memory),
            quantity(UnitFamily::Memory),
            quantity(UnitFamily::NetSpeed),
        ),
        proptest::option::of(any::<u64>()),
        (text(), text(), text(), text()),
        any::<u16>(),
    )
        .prop_map(
            |(
                (phy_ip, cpu_type, n_cpu),
                (cpu_clock, ram_size, disk_size, net_speed),
                max_vm_number,
                (mach_username, mach_password, xm_username, xm_password),
                mm_port,
            )| PhyMachRegistration {
                phy_ip,
                cpu_type,
                n_cpu,
                cpu_clock,
                ram_size,
                disk_size,
                net_speed,
                max_vm_number,
                mach_username,
                mach_password,
                xm_username,
                xm_password,
                mm_port,
            },
        )
}

fn vm_registration() -> impl Strategy<Value = VmRegistration> {
    (id(), id(), token(), token(), real(), real(), real()).prop_map(
        |(s_id, phy_id, vm_local_id, virt_ip, allocated_cpu, allocated_ram, allocated_disk)| {
            VmRegistration {
                s_id,
                phy_id,
                vm_local_id,
                virt_ip,
                allocated_cpu,
                allocated_ram,
                allocated_disk,
            }
        },
    )
}

/// Well-formed requests of one kind.
pub fn request_of(kind: RequestKind) -> BoxedStrategy<Request> {
    use RequestKind as K;
    fn is<S: Strategy + 'static>(
        s: S,
        f: impl Fn(S::Value) -> IsRequest + 'static,
    ) -> BoxedStrategy<Request> {
        s.prop_map(move |v| Request::Is(f(v))).boxed()
    }
    match kind {
        K::GetPhyMach => is(id(), |phy_id| IsRequest::GetPhyMach { phy_id }),
        K::GetVm => is(id(), |vm_id| IsRequest::GetVm { vm_id }),
        K::GetVmMachMngr => is(id(), |vm_id| IsRequest::GetVmMachMngr { vm_id }),
        K::GetVmServ => is(id(), |vm_id| IsRequest::GetVmServ { vm_id }),
        K::GetVmStatus => is(id(), |vm_id| IsRequest::GetVmStatus { vm_id }),
        K::ListPhyMach => Just(IsRequest::ListPhyMach.into()).boxed(),
        K::ListPhyMachStatus => Just(IsRequest::ListPhyMachStatus.into()).boxed(),
        K::ListRepo => Just(IsRequest::ListRepo.into()).boxed(),
        K::ListServ => Just(IsRequest::ListServ.into()).boxed(),
        K::ListVm => is(id(), |s_id| IsRequest::ListVm { s_id }),
        K::RegPhyMach => is(phy_mach_registration(), IsRequest::RegPhyMach),
        K::RegRepo => is(
            (token(), any::<u16>(), text(), text()),
            |(ip_addr, port, user_name, passwd)| IsRequest::RegRepo {
                ip_addr,
                port,
                user_name,
                passwd,
            },
        ),
        K::RegServ => is(
            (id(), text(), quantity(UnitFamily::Memory)),
            |(rm_id, name, req_disk)| IsRequest::RegServ {
                rm_id,
                name,
                req_disk,
            },
        ),
        K::RegVm => is(vm_registration(), IsRequest::RegVm),
        K::IsSrvProtoVer => Just(IsRequest::SrvProtoVer.into()).boxed(),
        K::UnregPhyMach => is(id(), |phy_id| IsRequest::UnregPhyMach { phy_id }),
        K::UnregRepo => is(id(), |rm_id| IsRequest::UnregRepo { rm_id }),
        K::UnregServ => is(id(), |s_id| IsRequest::UnregServ { s_id }),
        K::UnregVm => is(id(), |vm_id| IsRequest::UnregVm { vm_id }),
        K::UpdateVmStatus => is((id(), status()), |(vm_id, status)| {
            IsRequest::UpdateVmStatus { vm_id, status }
        }),
        K::RmSrvProtoVer => Just(RmRequest::SrvProtoVer.into()).boxed(),
        K::RmStopVm => id()
            .prop_map(|vm_id| RmRequest::StopVm { vm_id }.into())
            .boxed(),
        K::RmSubmitVm => (id(), id())
            .prop_map(|(s_id, phy_id)| RmRequest::SubmitVm { s_id, phy_id }.into())
            .boxed(),
        K::ScSrvProtoVer => Just(ScRequest::SrvProtoVer.into()).boxed(),
        K::ScStopServ => id()
            .prop_map(|vm_id| ScRequest::StopServ { vm_id }.into())
            .boxed(),
        K::ScSubmitServ => id()
            .prop_map(|s_id| ScRequest::SubmitServ { s_id }.into())
            .boxed(),
        K::MmSrvProtoVer => Just(MmRequest::SrvProtoVer.into()).boxed(),
        K::MmStartVm => (id(), proptest::collection::vec(any::<u8>(), 0..512))
            .prop_map(|(s_id, image)| MmRequest::StartVm { s_id, image }.into())
            .boxed(),
        K::MmStopVm => token()
            .prop_map(|vm_local_id| MmRequest::StopVm { vm_local_id }.into())
            .boxed(),
    }
}

pub fn any_request() -> impl Strategy<Value = Request> {
    select(RequestKind::ALL.to_vec()).prop_flat_map(request_of)
}

fn service_entry() -> impl Strategy<Value = ServiceEntry> {
    (id(), text(), id(), token(), any::<u16>()).prop_map(|(s_id, name, rm_id, rm_ip, rm_port)| {
        ServiceEntry {
            s_id,
            name,
            rm_id,
            rm_ip,
            rm_port,
        }
    })
}

fn entries<S: Strategy>(s: S) -> impl Strategy<Value = Vec<S::Value>> {
    proptest::collection::vec(s, 0..6)
}

pub fn listing(kind: ListKind) -> BoxedStrategy<Listing> {
    match kind {
        ListKind::PhyMach => entries((id(), token(), any::<u16>()).prop_map(
            |(phy_id, phy_ip, mm_port)| PhyMachEntry {
                phy_id,
                phy_ip,
                mm_port,
            },
        ))
        .prop_map(Listing::PhyMach)
        .boxed(),
        ListKind::PhyMachStatus => entries(
            (id(), real(), real(), real(), quantity(UnitFamily::NetSpeed)).prop_map(
                |(phy_id, avail_cpu, avail_ram, avail_disk, net_speed)| PhyMachStatusEntry {
                    phy_id,
                    avail_cpu,
                    avail_ram,
                    avail_disk,
                    net_speed,
                },
            ),
        )
        .prop_map(Listing::PhyMachStatus)
        .boxed(),
        ListKind::Repo => entries((id(), token(), any::<u16>(), text(), text()).prop_map(
            |(repo_id, ip_addr, port, user_name, passwd)| RepoEntry {
                repo_id,
                ip_addr,
                port,
                user_name,
                passwd,
            },
        ))
        .prop_map(Listing::Repo)
        .boxed(),
        ListKind::Serv => entries(service_entry()).prop_map(Listing::Serv).boxed(),
        ListKind::Vm => entries((id(), id(), token(), token(), status()).prop_map(
            |(vm_id, phy_id, vm_local_id, virt_ip, status)| VmEntry {
                vm_id,
                phy_id,
                vm_local_id,
                virt_ip,
                status,
            },
        ))
        .prop_map(Listing::Vm)
        .boxed(),
    }
}

fn payload(shape: ReplyShape) -> BoxedStrategy<Payload> {
    match shape {
        ReplyShape::Id => id().prop_map(Payload::Id).boxed(),
        ReplyShape::Version => token().prop_map(Payload::Version).boxed(),
        ReplyShape::Status => status().prop_map(Payload::Status).boxed(),
        ReplyShape::PhyMachAddr => (token(), any::<u16>())
            .prop_map(|(phy_ip, mm_port)| Payload::PhyMachAddr { phy_ip, mm_port })
            .boxed(),
        ReplyShape::VmDetails => (id(), id(), token(), token(), status())
            .prop_map(|(s_id, phy_id, vm_local_id, virt_ip, status)| {
                Payload::Vm(VmDetails {
                    s_id,
                    phy_id,
                    vm_local_id,
                    virt_ip,
                    status,
                })
            })
            .boxed(),
        ReplyShape::VmLocation => (id(), token(), any::<u16>(), token())
            .prop_map(|(phy_id, phy_ip, mm_port, vm_local_id)| {
                Payload::VmLocation(VmLocation {
                    phy_id,
                    phy_ip,
                    mm_port,
                    vm_local_id,
                })
            })
            .boxed(),
        ReplyShape::Service => service_entry().prop_map(Payload::Service).boxed(),
        ReplyShape::List(_) => unreachable!("list shapes carry a listing"),
    }
}

/// Well-formed replies to a request of `kind`, errors included.
pub fn reply_for(kind: RequestKind) -> BoxedStrategy<Reply> {
    let ok = match kind.reply_shape() {
        ReplyShape::List(lk) => listing(lk).prop_map(Reply::List).boxed(),
        shape => payload(shape).prop_map(Reply::Ok).boxed(),
    };
    prop_oneof![4 => ok, 1 => error_code().prop_map(Reply::Err)].boxed()
}

pub fn any_reply() -> impl Strategy<Value = (RequestKind, Reply)> {
    select(RequestKind::ALL.to_vec()).prop_flat_map(|k| reply_for(k).prop_map(move |r| (k, r)))
}
