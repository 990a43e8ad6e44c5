#pragma once

// Reference values produced by tests/oracles/make_oracles.py (numpy/scipy).

namespace muse::oracle {

// D̃^{-1/2}(A + I)D̃^{-1/2}, edges (0,1) (1,2) (2,3) (0,2), row-major 4×4.
inline constexpr double kNormalized[] = {
    0.3333333333333333, 0.3333333333333333, 0.2886751345948129, 0.0,
    0.3333333333333333, 0.3333333333333333, 0.2886751345948129, 0.0,
    0.2886751345948129, 0.2886751345948129, 0.25, 0.35355339059327373,
    0.0, 0.0, 0.35355339059327373, 0.5};

// relu(Â relu(Â X W1) W2) on the graph above, 4×2.
inline constexpr double kGcnOut[] = {0.0, 0.02839986377993299, 0.0, 0.02839986377993299,
                                     0.06244759114754795, 0.02686529576734757,
                                     0.10624573978175343, 0.002130246744625264};

// 12-point helix (cos a, sin a, a/10), a ∈ linspace(0, 3, 12), k = 4.
inline constexpr double kHelixGeodesicRow0[] = {
    0.0, 0.2732472770267036, 0.5414721515338115, 0.7997470505939113,
    1.0433324128139994, 1.316579689840703, 1.5848045643478108, 1.8580518413745144,
    2.1262767158816223, 2.3995239929083256, 2.657798891968426, 2.901384254188514};
inline constexpr double kHelixMdsTop2[] = {10.177742665155444, 0.030181091288245913};

// row_softmax(X′X′ᵀ/√2), X′ = [[1,0],[0.6,0.8],[-1,0.5]].
inline constexpr double kLatentAdj[] = {
    0.5008125556313465, 0.37743153127990725, 0.12175591308874623,
    0.34543899498436875, 0.45836177307758325, 0.19619923193804803,
    0.13039065148512338, 0.22957284368269396, 0.6400365048321827};

// ψ = [0.2,0.5,0.3], members [[0.1,0.9,0],[0.4,0.2,0.4],[0,0.3,0.7]], m = [0.1,-0.3,0.7].
inline constexpr double kMaskKl = 0.007875534082084447;

// a = [1,2,2,3,5,4], b = [2,1,3,3,6,5].
inline constexpr double kSpearmanTies = 0.8676470588235294;

inline constexpr double kSmoothnessTwoNode = 2.0;

// R̂=0.1, B=1, d=2, M=(1,1), N=100, V=2, δ=0.05, [a,b]=[0,1].
inline constexpr double kBoundComplexity = 0.5330218444630791;
inline constexpr double kBoundConfidence = 0.10466645397014605;
inline constexpr double kBoundTotal = 0.7376882984332251;

}  // namespace muse::oracle
