#include "mirrorboard/session.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mirror_fixture.hpp"

using namespace mirrorboard;
using namespace mirrorboard::session;
using namespace mirrorboard::testing;

namespace {

void expect_vec_near(const Vec3& a, const Vec3& b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

wire::Flake pose_flake(const AvatarPose& p) {
  wire::Flake f;
  f.scope = "demo";
  f.label = pose_label(p.user);
  f.origin = p.user;
  f.cls = wire::DeliveryClass::state;
  f.seq = 1;
  f.payload = pose_payload(p);
  return f;
}

SessionState star_session(int k) {
  SessionState s;
  add_participant(s, "P", Role::presenter);
  for (int i = 0; i < k; ++i) add_participant(s, "A" + std::to_string(i), Role::audience);
  return s;
}

}  // namespace

TEST(Mirror, AxisAlignedReflection) {
  BoardPlane b;  // z = 0, n = +z
  AvatarPose p;
  p.position = {0.5, 1.6, 1.0};
  p.gaze_origin = p.position;
  p.forward = {0, 0, -1};
  p.gaze_dir = {0, 0, -1};
  const auto m = mirror_pose(p, b);
  expect_vec_near(m.position, {0.5, 1.6, -1.0}, 1e-15);
  expect_vec_near(m.forward, {0, 0, 1}, 1e-15);
  expect_vec_near(m.up, {0, 1, 0}, 1e-15);
  EXPECT_EQ(m.user, p.user);
  EXPECT_EQ(m.t_ms, p.t_ms);
}

TEST(Mirror, PointOnPlaneUnchanged) {
  AvatarPose p;
  p.position = {0.3, 1.2, 0.0};
  p.gaze_origin = p.position;
  const auto m = mirror_pose(p, BoardPlane{});
  expect_vec_near(m.position, {0.3, 1.2, 0.0}, 0.0);
}

TEST(Mirror, GazePointPreservedExample) {
  BoardPlane b;
  AvatarPose p;
  p.position = p.gaze_origin = {0, 1.6, 1};
  p.gaze_dir = normalized(Vec3{0.2, 1.0, 0} - p.gaze_origin);
  p.forward = p.gaze_dir;
  p.up = normalized(cross(cross(p.forward, Vec3{0, 1, 0}), p.forward));
  const auto m = mirror_pose(p, b);
  auto hit = oracle_hit(m.gaze_origin, m.gaze_dir, b);
  ASSERT_TRUE(hit);
  expect_vec_near(*hit, {0.2, 1.0, 0.0}, 1e-12);
}

TEST(Mirror, DegeneratePoseRejected) {
  AvatarPose p;
  p.forward = {0, 0, -2};
  EXPECT_THROW(mirror_pose(p, BoardPlane{}), SessionError);
  AvatarPose q;
  q.up = normalized(Vec3{0, 1, -0.01});  // not orthogonal to forward
  try {
    mirror_pose(q, BoardPlane{});
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionErrc::degenerate_pose);
  }
}

TEST(Mirror, ReflectedBasisIsLeftHanded) {
  AvatarPose p;
  const auto m = mirror_pose(p, BoardPlane{});
  const Vec3 right = cross(p.forward, p.up);
  const Vec3 right_m = cross(m.forward, m.up);
  // The reflection of the original right vector is the negation of the rebuilt one.
  expect_vec_near(reflect_direction(right, BoardPlane{}), -right_m, 1e-15);
}

TEST(MirrorProperty, InvolutionFixedPointsGazeAndDistance) {
  std::mt19937_64 rng(2024);
  double worst_involution = 0, worst_fixed = 0, worst_gaze = 0, worst_dist = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto b = random_board(rng);
    const auto p = random_pose(rng, b);
    const auto m = mirror_pose(p, b);
    const auto mm = mirror_pose(m, b);
    for (auto [x, y] : {std::pair{p.position, mm.position}, {p.forward, mm.forward}, {p.up, mm.up},
                        {p.gaze_origin, mm.gaze_origin}, {p.gaze_dir, mm.gaze_dir}})
      worst_involution = std::max(worst_involution, max_abs_diff(x, y));

    std::uniform_real_distribution<double> u(-5, 5);
    const Vec3 on_plane = b.origin + u(rng) * b.right_axis() + u(rng) * b.up_axis();
    worst_fixed = std::max(worst_fixed, max_abs_diff(reflect_point(on_plane, b), on_plane));

    const auto q = oracle_hit(p.gaze_origin, p.gaze_dir, b);
    const auto q_m = oracle_hit(m.gaze_origin, m.gaze_dir, b);
    ASSERT_TRUE(q && q_m);
    worst_gaze = std::max(worst_gaze, max_abs_diff(*q, *q_m));

    worst_dist = std::max(worst_dist, std::abs(std::abs(b.signed_distance(m.position)) - std::abs(b.signed_distance(p.position))));
  }
  EXPECT_LE(worst_involution, 1e-9);
  EXPECT_LE(worst_fixed, 1e-12);
  EXPECT_LE(worst_gaze, 1e-9);
  EXPECT_LE(worst_dist, 1e-9);
}

TEST(Visibility, PresenterSeesAllAudience) {
  auto s = star_session(2);
  EXPECT_EQ(visible_avatars(s, "P"), (std::set<std::string>{"A0", "A1"}));
}

TEST(Visibility, AudienceSeesOnlyPresenter) {
  auto s = star_session(2);
  EXPECT_EQ(visible_avatars(s, "A0"), (std::set<std::string>{"P"}));
  EXPECT_EQ(visible_avatars(s, "A1"), (std::set<std::string>{"P"}));
}

TEST(Visibility, PresenterAloneSeesNobody) {
  EXPECT_TRUE(visible_avatars(star_session(0), "P").empty());
}

TEST(Visibility, UnknownViewer) {
  try {
    visible_avatars(star_session(1), "ghost");
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionErrc::unknown_user);
  }
}

TEST(Visibility, StarGraphForUpToFiveAudience) {
  for (int k = 0; k <= 5; ++k) {
    auto s = star_session(k);
    for (const auto& [viewer, vp] : s.participants) {
      const auto seen = visible_avatars(s, viewer);
      EXPECT_FALSE(seen.contains(viewer));
      for (const auto& [other, op] : s.participants) {
        if (other == viewer) continue;
        const bool edge = (vp.role == Role::presenter) != (op.role == Role::presenter);
        EXPECT_EQ(seen.contains(other), edge) << viewer << " -> " << other;
      }
    }
  }
}

TEST(Roles, SecondPresenterRejected) {
  auto s = star_session(1);
  EXPECT_THROW(add_participant(s, "Q", Role::presenter), SessionError);
  EXPECT_THROW(add_participant(s, "A0", Role::audience), SessionError);
}

TEST(PoseUpdate, NewerReplacesOlderIgnored) {
  auto s = star_session(1);
  AvatarPose p;
  p.user = "A0";
  p.position = p.gaze_origin = {1, 2, 3};
  s = apply_pose_update(s, pose_flake(p), 100);
  ASSERT_TRUE(s.participants["A0"].pose);
  EXPECT_EQ(s.participants["A0"].pose->t_ms, 100);

  p.position = p.gaze_origin = {4, 5, 6};
  const auto before = s;
  s = apply_pose_update(s, pose_flake(p), 50);
  EXPECT_EQ(s, before);

  s = apply_pose_update(s, pose_flake(p), 150);
  expect_vec_near(s.participants["A0"].pose->position, {4, 5, 6}, 1e-6);
}

TEST(PoseUpdate, OpenJoinRegistersAudience) {
  auto s = star_session(0);
  AvatarPose p;
  p.user = "newbie";
  EXPECT_EQ(apply_pose_update_in_place(s, pose_flake(p), 1), PoseUpdateResult::joined);
  EXPECT_EQ(s.participants["newbie"].role, Role::audience);

  s.open_join = false;
  p.user = "other";
  try {
    apply_pose_update(s, pose_flake(p), 1);
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionErrc::unknown_user);
  }
}

TEST(PoseUpdate, MalformedPayload) {
  auto s = star_session(1);
  AvatarPose p;
  p.user = "A0";
  auto f = pose_flake(p);
  f.payload = wire::Payload::vec3({{0, 0, 0}});
  try {
    apply_pose_update(s, f, 1);
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionErrc::malformed_pose_payload);
  }
  f.payload = wire::Payload::floats({1, 2, 3});
  EXPECT_THROW(apply_pose_update(s, f, 1), SessionError);
}

TEST(PoseUpdate, PayloadRoundTripKeepsBasisValid) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    auto p = random_pose(rng, BoardPlane{});
    const auto back = pose_from_flake(pose_flake(p), p.t_ms);
    EXPECT_TRUE(is_valid_pose(back));
    EXPECT_LE(max_abs_diff(back.gaze_origin, p.gaze_origin), 1e-6);
    EXPECT_LE(max_abs_diff(back.gaze_dir, p.gaze_dir), 1e-6);
  }
}

// Replay oracle: final state equals the per-user max-timestamp reduction.
TEST(PoseUpdate, InterleavedReplayKeepsMaxTimestampPose) {
  std::mt19937_64 rng(17);
  auto s = star_session(2);
  struct Update {
    std::string user;
    std::int64_t t;
    double x;
  };
  std::vector<Update> updates;
  for (const char* u : {"P", "A0", "A1"}) {
    std::vector<std::int64_t> ts(100);
    std::iota(ts.begin(), ts.end(), 0);
    std::shuffle(ts.begin(), ts.end(), rng);
    for (auto t : ts) updates.push_back({u, t * 10 + 1, static_cast<double>(t)});
  }
  std::shuffle(updates.begin(), updates.end(), rng);
  for (const auto& u : updates) {
    AvatarPose p;
    p.user = u.user;
    p.position = p.gaze_origin = {u.x, 0, 1};
    s = apply_pose_update(s, pose_flake(p), u.t);
  }
  std::map<std::string, Update> oracle;
  for (const auto& u : updates)
    if (!oracle.contains(u.user) || oracle[u.user].t < u.t) oracle[u.user] = u;
  for (const auto& [user, u] : oracle) {
    const auto& pose = s.participants.at(user).pose;
    ASSERT_TRUE(pose);
    EXPECT_EQ(pose->t_ms, u.t);
    EXPECT_EQ(pose->position.x, u.x);
  }
}

TEST(SessionConfig, JsonRoundTrip) {
  const auto s = session_from_json(
      R"({"board":{"origin":[0,0,0],"normal":[0,0,1],"extents":[2.0,1.25]},"roles":{"P":"PRESENTER","A":"AUDIENCE"},"open_join":false})");
  EXPECT_EQ(s.board, reference_board());
  EXPECT_FALSE(s.open_join);
  EXPECT_EQ(s.presenter(), "P");
  EXPECT_EQ(session_from_json(session_to_json(s)), s);
}

TEST(SessionConfig, RejectsBadInput) {
  EXPECT_THROW(session_from_json(R"({"board":{"normal":[0,0,2]}})"), SessionError);
  EXPECT_THROW(session_from_json(R"({"roles":{"P":"PRESENTER","Q":"PRESENTER"}})"), SessionError);
  EXPECT_THROW(session_from_json("{"), SessionError);
}
